//! Wave-function Monte-Carlo unravelings of the master equation.
//!
//! Two engines propagate single pure-state trajectories:
//!
//!  * quantum jump: deterministic drift under the effective non-Hermitian
//!    Hamiltonian H_NH = H − (i/2) Σ_j c_j†c_j, punctuated by jumps triggered
//!    when the squared norm decays below a uniformly drawn threshold r. The
//!    jump time is refined by a logarithmic secant solve of ⟨ψ(t)|ψ(t)⟩ = r,
//!    the channel drawn with p_j ∝ ⟨ψ|c_j†c_j|ψ⟩.
//!  * quantum state diffusion: Euler–Maruyama integration of the
//!    norm-conserving diffusive unraveling with one real Wiener increment per
//!    jump channel and per-step renormalization.
//!
//! Trajectories own private RNG substreams derived from (master_seed, index),
//! so ensembles are bit-reproducible for a fixed seed regardless of worker
//! count or execution order.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::eigen::{axpy, cdot, scale_vec, vnorm};
use crate::liouville::fmt_float;
use crate::models::LindbladModel;
use crate::operators::expectation_pure;
use crate::sparse::{ComplexSparseMatrix, OperatorError};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("invalid trajectory configuration: {0}")]
    InvalidConfig(String),
    #[error("initial state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("state annihilated at t = {time:.6}: all jump channel weights vanished")]
    StateAnnihilated { time: f64 },
    #[error("per-step norm defect {defect:.3e} at t = {time:.6} exceeds 1e-2 (dt too large)")]
    StepTooLarge { defect: f64, time: f64 },
    #[error("{failed} of {total} trajectories aborted (> 1%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("ensemble statistics require M >= 2, got {0}")]
    EnsembleTooSmall(usize),
}

/// Normalized pure state over the composite Hilbert space.
#[derive(Debug, Clone)]
pub struct PureState {
    pub amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self, TrajectoryError> {
        let n = vnorm(&amplitudes);
        if (n - 1.0).abs() > 1e-10 {
            return Err(TrajectoryError::NotNormalized(n));
        }
        Ok(Self { amplitudes })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unraveling {
    Jump,
    Qsd,
}

#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    pub m_trajectories: usize,
    pub dt: f64,
    pub t_final: f64,
    pub master_seed: u64,
    /// Relative tolerance of the jump-time threshold solve.
    pub jump_time_tol: f64,
    pub unraveling: Unraveling,
    pub n_samples: usize,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if self.m_trajectories < 1 {
            return Err(TrajectoryError::InvalidConfig("M must be >= 1".into()));
        }
        if self.dt <= 0.0 {
            return Err(TrajectoryError::InvalidConfig("dt must be > 0".into()));
        }
        if self.t_final <= 0.0 {
            return Err(TrajectoryError::InvalidConfig("t_final must be > 0".into()));
        }
        if !(self.jump_time_tol > 0.0 && self.jump_time_tol <= 1e-2) {
            return Err(TrajectoryError::InvalidConfig(
                "jump_time_tol must lie in (0, 1e-2]".into(),
            ));
        }
        if self.n_samples < 2 {
            return Err(TrajectoryError::InvalidConfig(
                "n_samples must be >= 2".into(),
            ));
        }
        Ok(())
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.n_samples)
            .map(|k| self.t_final * k as f64 / (self.n_samples - 1) as f64)
            .collect()
    }
}

/// RNG substream for one trajectory: ChaCha12 keyed by the master seed with
/// the trajectory index as the stream number.
pub fn substream_rng(master_seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// H_NH = H − (i/2) Σ_j c_j†c_j.
pub fn effective_nh_hamiltonian(model: &LindbladModel) -> ComplexSparseMatrix {
    let d = model.dim();
    let mut ldl_sum = ComplexSparseMatrix::zeros(d, d);
    for jump in &model.jumps {
        ldl_sum = ldl_sum
            .add(&jump.dagger().matmul(jump).expect("L†L dims"))
            .expect("sum dims");
    }
    model
        .hamiltonian
        .add(&ldl_sum.scale(C64::new(0.0, -0.5)))
        .expect("H_NH dims")
}

/// Output of a single trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryOutput {
    pub times: Vec<f64>,
    /// Row per sample time, column per observable (real parts).
    pub values: Array2<f64>,
    pub jump_times: Vec<f64>,
    pub jump_channels: Vec<usize>,
    /// Largest pre-renormalization norm defect seen (QSD diagnostic).
    pub max_norm_defect: f64,
    /// Normalized states at sample times, kept when requested.
    pub states: Option<Vec<Vec<C64>>>,
}

struct VecRk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    stage: Vec<C64>,
}

impl VecRk4 {
    fn new(dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            stage: z,
        }
    }

    /// One RK4 step of dψ/dt = −i H_NH ψ.
    fn step(&mut self, h_nh: &ComplexSparseMatrix, psi: &mut [C64], h: f64) {
        let minus_i = C64::new(0.0, -1.0);
        h_nh.matvec_into(psi, &mut self.k1);
        for v in &mut self.k1 {
            *v *= minus_i;
        }
        self.stage.copy_from_slice(psi);
        axpy(C64::new(0.5 * h, 0.0), &self.k1, &mut self.stage);
        h_nh.matvec_into(&self.stage, &mut self.k2);
        for v in &mut self.k2 {
            *v *= minus_i;
        }
        self.stage.copy_from_slice(psi);
        axpy(C64::new(0.5 * h, 0.0), &self.k2, &mut self.stage);
        h_nh.matvec_into(&self.stage, &mut self.k3);
        for v in &mut self.k3 {
            *v *= minus_i;
        }
        self.stage.copy_from_slice(psi);
        axpy(C64::new(h, 0.0), &self.k3, &mut self.stage);
        h_nh.matvec_into(&self.stage, &mut self.k4);
        for v in &mut self.k4 {
            *v *= minus_i;
        }
        let w = h / 6.0;
        for i in 0..psi.len() {
            psi[i] += w * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn norm_sq(psi: &[C64]) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum()
}

fn draw_threshold(rng: &mut ChaCha12Rng) -> f64 {
    loop {
        let r: f64 = rng.random();
        if r > 0.0 {
            return r;
        }
    }
}

fn record_row(
    psi: &[C64],
    observables: &[(String, ComplexSparseMatrix)],
    values: &mut Vec<f64>,
) -> Result<(), TrajectoryError> {
    let n = vnorm(psi);
    let mut normalized = psi.to_vec();
    scale_vec(1.0 / n, &mut normalized);
    for (_, op) in observables {
        values.push(expectation_pure(op, &normalized)?.re);
    }
    Ok(())
}

/// Propagate one quantum-jump trajectory, sampling observables on the fixed
/// time grid of `config`. Deterministic for a fixed RNG substream.
pub fn jump_trajectory(
    model: &LindbladModel,
    psi0: &PureState,
    config: &TrajectoryConfig,
    observables: &[(String, ComplexSparseMatrix)],
    rng: &mut ChaCha12Rng,
) -> Result<TrajectoryOutput, TrajectoryError> {
    config.validate()?;
    let n0 = vnorm(&psi0.amplitudes);
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(TrajectoryError::NotNormalized(n0));
    }
    let h_nh = effective_nh_hamiltonian(model);
    let jump_ops: Vec<&ComplexSparseMatrix> = model.jumps.iter().collect();
    let times = config.sample_times();
    let keep_states = observables.is_empty();

    let dim = psi0.dim();
    let mut rk4 = VecRk4::new(dim);
    let mut psi = psi0.amplitudes.clone();
    let mut r = draw_threshold(rng);
    let mut jump_times = Vec::new();
    let mut jump_channels = Vec::new();
    let mut values = Vec::with_capacity(times.len() * observables.len());
    let mut states: Option<Vec<Vec<C64>>> = keep_states.then(Vec::new);

    let store = |psi: &[C64], values: &mut Vec<f64>, states: &mut Option<Vec<Vec<C64>>>| -> Result<(), TrajectoryError> {
        record_row(psi, observables, values)?;
        if let Some(list) = states {
            let n = vnorm(psi);
            let mut normalized = psi.to_vec();
            scale_vec(1.0 / n, &mut normalized);
            list.push(normalized);
        }
        Ok(())
    };

    store(&psi, &mut values, &mut states)?;
    let mut t = 0.0f64;
    let mut psi_prev = psi.clone();
    for &t_target in &times[1..] {
        while t < t_target - 1e-12 * config.dt.max(1.0) {
            let h = config.dt.min(t_target - t);
            psi_prev.copy_from_slice(&psi);
            let n_prev = norm_sq(&psi);
            rk4.step(&h_nh, &mut psi, h);
            let n_new = norm_sq(&psi);
            if n_new < r {
                let tau = solve_jump_time(&h_nh, &mut rk4, &psi_prev, n_prev, h, r, config.jump_time_tol, &mut psi);
                t += tau;
                apply_jump(&jump_ops, &mut psi, t, rng, &mut jump_times, &mut jump_channels)?;
                r = draw_threshold(rng);
            } else {
                t += h;
            }
        }
        t = t_target;
        store(&psi, &mut values, &mut states)?;
    }

    let n_obs = observables.len();
    Ok(TrajectoryOutput {
        times: times.clone(),
        values: Array2::from_shape_vec((times.len(), n_obs), values).expect("sample grid"),
        jump_times,
        jump_channels,
        max_norm_defect: 0.0,
        states,
    })
}

/// Solve ⟨ψ(τ)|ψ(τ)⟩ = r on τ ∈ [0, h] by a logarithmic secant method with
/// re-integration from the last accepted state per iterate, capped at 50
/// iterations with a bisection fallback. On return `psi` holds ψ(τ*).
#[allow(clippy::too_many_arguments)]
fn solve_jump_time(
    h_nh: &ComplexSparseMatrix,
    rk4: &mut VecRk4,
    psi_start: &[C64],
    n_start: f64,
    h: f64,
    r: f64,
    rel_tol: f64,
    psi: &mut [C64],
) -> f64 {
    let eval = |tau: f64, rk4: &mut VecRk4, out: &mut [C64]| -> f64 {
        out.copy_from_slice(psi_start);
        if tau > 0.0 {
            rk4.step(h_nh, out, tau);
        }
        norm_sq(out)
    };

    // log-norm residual; f(0) >= 0 > f(h)
    let f_of = |n: f64| (n / r).ln();
    let mut lo = 0.0f64;
    let mut f_lo = f_of(n_start);
    let mut hi = h;
    let mut f_hi = f_of(norm_sq(psi));
    if f_lo <= 0.0 {
        // threshold already met at the step start
        psi.copy_from_slice(psi_start);
        return 0.0;
    }

    let mut t0 = lo;
    let mut f0 = f_lo;
    let mut t1 = hi;
    let mut f1 = f_hi;
    for _ in 0..50 {
        let denom = f1 - f0;
        let mut tau = if denom.abs() > 1e-300 {
            t1 - f1 * (t1 - t0) / denom
        } else {
            0.5 * (lo + hi)
        };
        if !(tau > lo && tau < hi) {
            tau = 0.5 * (lo + hi);
        }
        let n_tau = eval(tau, rk4, psi);
        if (n_tau - r).abs() <= rel_tol * r {
            return tau;
        }
        let f_tau = f_of(n_tau);
        if f_tau >= 0.0 {
            lo = tau;
            f_lo = f_tau;
        } else {
            hi = tau;
            f_hi = f_tau;
        }
        t0 = t1;
        f0 = f1;
        t1 = tau;
        f1 = f_tau;
    }
    // bisection fallback on the maintained bracket
    let _ = (f_lo, f_hi);
    for _ in 0..200 {
        let tau = 0.5 * (lo + hi);
        let n_tau = eval(tau, rk4, psi);
        if (n_tau - r).abs() <= rel_tol * r || (hi - lo) < f64::EPSILON * h.max(1e-300) {
            return tau;
        }
        if n_tau > r {
            lo = tau;
        } else {
            hi = tau;
        }
    }
    let tau = 0.5 * (lo + hi);
    eval(tau, rk4, psi);
    tau
}

fn apply_jump(
    jump_ops: &[&ComplexSparseMatrix],
    psi: &mut [C64],
    t: f64,
    rng: &mut ChaCha12Rng,
    jump_times: &mut Vec<f64>,
    jump_channels: &mut Vec<usize>,
) -> Result<(), TrajectoryError> {
    let mut candidates: Vec<Vec<C64>> = Vec::with_capacity(jump_ops.len());
    let mut weights = Vec::with_capacity(jump_ops.len());
    for op in jump_ops {
        let cpsi = op.matvec(psi);
        weights.push(norm_sq(&cpsi));
        candidates.push(cpsi);
    }
    let total: f64 = weights.iter().sum();
    if total <= 1e-28 * norm_sq(psi).max(f64::MIN_POSITIVE) {
        return Err(TrajectoryError::StateAnnihilated { time: t });
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = jump_ops.len() - 1;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            chosen = j;
            break;
        }
    }
    let mut new_psi = candidates.swap_remove(chosen);
    let n = vnorm(&new_psi);
    scale_vec(1.0 / n, &mut new_psi);
    psi.copy_from_slice(&new_psi);
    jump_times.push(t);
    jump_channels.push(chosen);
    Ok(())
}

/// Propagate one quantum-state-diffusion trajectory (Euler–Maruyama with one
/// real Wiener increment per channel and per-step renormalization).
pub fn qsd_trajectory(
    model: &LindbladModel,
    psi0: &PureState,
    config: &TrajectoryConfig,
    observables: &[(String, ComplexSparseMatrix)],
    rng: &mut ChaCha12Rng,
) -> Result<TrajectoryOutput, TrajectoryError> {
    config.validate()?;
    let n0 = vnorm(&psi0.amplitudes);
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(TrajectoryError::NotNormalized(n0));
    }
    let jumps: Vec<(&ComplexSparseMatrix, ComplexSparseMatrix)> = model
        .jumps
        .iter()
        .map(|l| (l, l.dagger()))
        .collect();
    let times = config.sample_times();
    let keep_states = observables.is_empty();
    let dim = psi0.dim();

    let mut psi = psi0.amplitudes.clone();
    let mut values = Vec::with_capacity(times.len() * observables.len());
    let mut states: Option<Vec<Vec<C64>>> = keep_states.then(Vec::new);
    let mut max_defect = 0.0f64;

    let mut new_psi = vec![C64::new(0.0, 0.0); dim];
    let mut cpsi = vec![C64::new(0.0, 0.0); dim];
    let mut cdag_cpsi = vec![C64::new(0.0, 0.0); dim];

    record_row(&psi, observables, &mut values)?;
    if let Some(list) = &mut states {
        list.push(psi.clone());
    }

    let mut t = 0.0f64;
    for &t_target in &times[1..] {
        while t < t_target - 1e-12 * config.dt.max(1.0) {
            let h = config.dt.min(t_target - t);
            let sqrt_h = h.sqrt();

            // coherent drift: ψ − i h H ψ
            model.hamiltonian.matvec_into(&psi, &mut new_psi);
            let mih = C64::new(0.0, -h);
            for i in 0..dim {
                new_psi[i] = psi[i] + mih * new_psi[i];
            }

            for (l, ldag) in &jumps {
                if l.nnz() == 0 {
                    // still consume the channel's Wiener increment to keep
                    // substream alignment independent of sparsity
                    let _: f64 = rng.sample(StandardNormal);
                    continue;
                }
                l.matvec_into(&psi, &mut cpsi);
                let expect_c = cdot(&psi, &cpsi);
                let x = 2.0 * expect_c.re;
                ldag.matvec_into(&cpsi, &mut cdag_cpsi);
                let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_h;
                // drift: −½(c†c − x c + x²/4)ψ dt ; diffusion: (c − x/2)ψ dW
                for i in 0..dim {
                    new_psi[i] += -0.5
                        * h
                        * (cdag_cpsi[i] - x * cpsi[i] + 0.25 * x * x * psi[i])
                        + dw * (cpsi[i] - 0.5 * x * psi[i]);
                }
            }

            let n = vnorm(&new_psi);
            let defect = (n - 1.0).abs();
            max_defect = max_defect.max(defect);
            if defect > 1e-2 {
                return Err(TrajectoryError::StepTooLarge { defect, time: t });
            }
            scale_vec(1.0 / n, &mut new_psi);
            psi.copy_from_slice(&new_psi);
            t += h;
        }
        t = t_target;
        record_row(&psi, observables, &mut values)?;
        if let Some(list) = &mut states {
            list.push(psi.clone());
        }
    }

    let n_obs = observables.len();
    Ok(TrajectoryOutput {
        times: times.clone(),
        values: Array2::from_shape_vec((times.len(), n_obs), values).expect("sample grid"),
        jump_times: Vec::new(),
        jump_channels: Vec::new(),
        max_norm_defect: max_defect,
        states,
    })
}

/// Per-observable, per-time ensemble statistics.
#[derive(Debug, Clone)]
pub struct EnsembleEstimate {
    pub observable: String,
    pub mean: f64,
    /// Sample standard deviation / √M.
    pub stderr: f64,
    pub m: usize,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub observable_names: Vec<String>,
    pub mean: Array2<f64>,
    pub stderr: Array2<f64>,
    pub m_effective: usize,
    pub failed: usize,
    pub master_seed: u64,
}

impl EnsembleResult {
    pub fn estimates(&self) -> Vec<Vec<EnsembleEstimate>> {
        self.times
            .iter()
            .enumerate()
            .map(|(i, _)| {
                self.observable_names
                    .iter()
                    .enumerate()
                    .map(|(j, name)| EnsembleEstimate {
                        observable: name.clone(),
                        mean: self.mean[(i, j)],
                        stderr: self.stderr[(i, j)],
                        m: self.m_effective,
                    })
                    .collect()
            })
            .collect()
    }

    /// CSV rows (time, observable, mean, stderr, M) with the master seed
    /// echoed in the header for reproducibility.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# master_seed={}\n", self.master_seed);
        out.push_str("time,observable,mean,stderr,M\n");
        for (i, t) in self.times.iter().enumerate() {
            for (j, name) in self.observable_names.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_float(*t),
                    name,
                    fmt_float(self.mean[(i, j)]),
                    fmt_float(self.stderr[(i, j)]),
                    self.m_effective
                ));
            }
        }
        out
    }
}

/// Run M independent trajectories and aggregate observable statistics.
///
/// Substreams derive deterministically from (master_seed, index); aggregation
/// is an index-ordered reduction, so the result is bit-reproducible for a
/// fixed seed across thread counts. Fails if more than 1% of trajectories
/// abort.
pub fn ensemble_average(
    model: &LindbladModel,
    psi0: &PureState,
    observables: &[(String, ComplexSparseMatrix)],
    config: &TrajectoryConfig,
) -> Result<EnsembleResult, TrajectoryError> {
    config.validate()?;
    if config.m_trajectories < 2 {
        return Err(TrajectoryError::EnsembleTooSmall(config.m_trajectories));
    }
    let m = config.m_trajectories;
    let results: Vec<Result<Array2<f64>, TrajectoryError>> = (0..m)
        .into_par_iter()
        .map(|index| {
            let mut rng = substream_rng(config.master_seed, index as u64);
            let out = match config.unraveling {
                Unraveling::Jump => jump_trajectory(model, psi0, config, observables, &mut rng)?,
                Unraveling::Qsd => qsd_trajectory(model, psi0, config, observables, &mut rng)?,
            };
            Ok(out.values)
        })
        .collect();

    let mut ok = Vec::with_capacity(m);
    let mut failed = 0usize;
    let mut first_failure = None;
    for res in results {
        match res {
            Ok(v) => ok.push(v),
            Err(e) => {
                failed += 1;
                first_failure.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failed as f64 > 0.01 * m as f64 || ok.len() < 2 {
        return Err(TrajectoryError::TooManyFailures {
            failed,
            total: m,
            first: first_failure.unwrap_or_else(|| "no failure".into()),
        });
    }

    let times = config.sample_times();
    let n_t = times.len();
    let n_o = observables.len();
    let m_ok = ok.len();
    let mut mean = Array2::<f64>::zeros((n_t, n_o));
    for v in &ok {
        mean += v;
    }
    mean.mapv_inplace(|x| x / m_ok as f64);
    let mut var = Array2::<f64>::zeros((n_t, n_o));
    for v in &ok {
        var += &(v - &mean).mapv(|x| x * x);
    }
    let stderr = var.mapv(|s| (s / ((m_ok - 1).max(1) as f64) / m_ok as f64).sqrt());

    Ok(EnsembleResult {
        times,
        observable_names: observables.iter().map(|(n, _)| n.clone()).collect(),
        mean,
        stderr,
        m_effective: m_ok,
        failed,
        master_seed: config.master_seed,
    })
}
