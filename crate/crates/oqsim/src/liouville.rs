//! Direct density-matrix evolution under the Lindblad master equation.
//!
//! dρ/dt = 𝓛[ρ] = −i[H, ρ] + Σ_μ (L_μ ρ L_μ† − ½ L_μ†L_μ ρ − ½ ρ L_μ†L_μ)
//!
//! The module owns the density-matrix invariants (Hermiticity, unit trace,
//! positivity up to tolerance), the vectorization isomorphism, and the
//! superoperator construction. Vectorization is row-major: vec(ρ)[r·d + c] =
//! ρ_rc, so vec(AρB) = (A ⊗ Bᵀ) vec(ρ). Correctness of the superoperator is
//! defined operationally by equivalence with [`lindblad_rhs`].

use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::eigen::{self, EigenError};
use crate::models::LindbladModel;
use crate::sparse::{ComplexSparseMatrix, OperatorError};

pub const TRACE_TOL: f64 = 1e-10;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = -1e-8;

#[derive(Debug, Error)]
pub enum LiouvilleError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),
    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NonHermitian(f64),
    #[error("invariant `{kind}` violated at t = {time:.6}: {value:.3e} (dt too large?)")]
    InvariantViolation {
        kind: &'static str,
        value: f64,
        time: f64,
    },
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("degenerate steady manifold: found {0} null vectors")]
    DegenerateSteadyState(usize),
    #[error("no steady state found at tolerance: smallest L†L eigenvalue {value:.3e} exceeds {threshold:.3e}")]
    NoNullVector { value: f64, threshold: f64 },
}

/// Hermitian, unit-trace, positive-semidefinite state of the full system.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: ComplexSparseMatrix,
}

impl DensityMatrix {
    /// Validate Hermiticity (1e-10), unit trace (1e-10), and positivity
    /// (smallest eigenvalue ≥ −1e−8).
    pub fn new(matrix: ComplexSparseMatrix) -> Result<Self, LiouvilleError> {
        if !matrix.is_square() {
            return Err(LiouvilleError::NotDensityMatrix("not square".into()));
        }
        let defect = matrix.hermitian_defect();
        if defect > HERMITICITY_TOL {
            return Err(LiouvilleError::NotDensityMatrix(format!(
                "Hermiticity defect {defect:.3e}"
            )));
        }
        let tr = matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(LiouvilleError::NotDensityMatrix(format!(
                "trace {tr} differs from 1"
            )));
        }
        let min_eig = eigen::eigvalsh(&matrix.to_dense())?
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < POSITIVITY_TOL {
            return Err(LiouvilleError::NotDensityMatrix(format!(
                "smallest eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// For states positive by construction (pure projectors, convex mixes).
    pub(crate) fn new_unchecked(matrix: ComplexSparseMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_dense(matrix: &Array2<C64>) -> Result<Self, LiouvilleError> {
        Self::new(ComplexSparseMatrix::from_dense(matrix))
    }

    pub fn from_pure(psi: &[C64]) -> Result<Self, LiouvilleError> {
        let norm_sq: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(LiouvilleError::NotDensityMatrix("zero state vector".into()));
        }
        let d = psi.len();
        let mut triplets = Vec::new();
        for (r, &ar) in psi.iter().enumerate() {
            for (c, &ac) in psi.iter().enumerate() {
                triplets.push((r, c, ar * ac.conj() / norm_sq));
            }
        }
        Ok(Self::new_unchecked(
            ComplexSparseMatrix::from_triplets(d, d, triplets).expect("pure state indices"),
        ))
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut psi = vec![C64::new(0.0, 0.0); dim];
        psi[index] = C64::new(1.0, 0.0);
        Self::from_pure(&psi).expect("basis state is valid")
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::new_unchecked(
            ComplexSparseMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)),
        )
    }

    /// Tensor product of factors, site 0 leftmost.
    pub fn product(factors: &[DensityMatrix]) -> Self {
        let mut acc = factors[0].matrix.clone();
        for f in &factors[1..] {
            acc = acc.kron(&f.matrix);
        }
        Self::new_unchecked(acc)
    }

    pub fn matrix(&self) -> &ComplexSparseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dense(&self) -> Array2<C64> {
        self.matrix.to_dense()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// tr ρ² (real for Hermitian ρ).
    pub fn purity(&self) -> f64 {
        self.matrix.entries().map(|(_, _, v)| v.norm_sqr()).sum()
    }

    pub fn expectation(&self, op: &ComplexSparseMatrix) -> Result<C64, LiouvilleError> {
        Ok(crate::operators::expectation_dm(op, &self.matrix)?)
    }
}

/// Vectorization stacking convention tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stacking {
    /// vec(ρ)[r·d + c] = ρ_rc
    RowMajor,
}

/// Vectorized Liouvillian L♯ acting on vec(ρ).
#[derive(Debug, Clone)]
pub struct Superoperator {
    pub matrix: ComplexSparseMatrix,
    pub convention: Stacking,
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply_dense(&self, rho: &Array2<C64>) -> Result<Array2<C64>, LiouvilleError> {
        let v = vectorize_dense(rho);
        devectorize(&self.matrix.matvec(&v))
    }
}

pub fn vectorize_dense(rho: &Array2<C64>) -> Vec<C64> {
    let (d, d2) = rho.dim();
    debug_assert_eq!(d, d2);
    let mut v = Vec::with_capacity(d * d);
    for r in 0..d {
        for c in 0..d {
            v.push(rho[(r, c)]);
        }
    }
    v
}

pub fn vectorize(rho: &ComplexSparseMatrix) -> Vec<C64> {
    let d = rho.rows();
    let mut v = vec![C64::new(0.0, 0.0); d * rho.cols()];
    for (r, c, val) in rho.entries() {
        v[r * d + c] = val;
    }
    v
}

pub fn devectorize(v: &[C64]) -> Result<Array2<C64>, LiouvilleError> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(LiouvilleError::Operator(OperatorError::NotSquareLength(n)));
    }
    Ok(Array2::from_shape_fn((d, d), |(r, c)| v[r * d + c]))
}

pub fn devectorize_sparse(v: &[C64]) -> Result<ComplexSparseMatrix, LiouvilleError> {
    Ok(ComplexSparseMatrix::from_dense(&devectorize(v)?))
}

/// Build the vectorized Liouvillian:
/// L♯ = −i(H⊗I − I⊗Hᵀ) + Σ_μ (L⊗L̄ − ½(L†L)⊗I − ½ I⊗(L†L)ᵀ).
pub fn build_superoperator(model: &LindbladModel) -> Superoperator {
    Superoperator {
        matrix: superoperator_matrix(&model.hamiltonian, &model.jumps),
        convention: Stacking::RowMajor,
    }
}

/// Vectorized Liouvillian from explicit operator parts (row-major stacking).
pub fn superoperator_matrix(
    h: &ComplexSparseMatrix,
    jumps: &[ComplexSparseMatrix],
) -> ComplexSparseMatrix {
    let d = h.rows();
    let id = ComplexSparseMatrix::identity(d);
    let minus_i = C64::new(0.0, -1.0);
    let half = C64::new(0.5, 0.0);

    let mut l_sharp = h
        .kron(&id)
        .sub(&id.kron(&h.transpose()))
        .expect("superoperator dims")
        .scale(minus_i);
    for jump in jumps {
        let ldl = jump.dagger().matmul(jump).expect("L†L dims");
        let term = jump
            .kron(&jump.conj())
            .sub(&ldl.kron(&id).scale(half))
            .expect("superoperator dims")
            .sub(&id.kron(&ldl.transpose()).scale(half))
            .expect("superoperator dims");
        l_sharp = l_sharp.add(&term).expect("superoperator dims");
    }
    l_sharp
}

/// Precomputed operators for repeated right-hand-side evaluation.
pub(crate) struct RhsOps {
    pub h: ComplexSparseMatrix,
    pub jumps: Vec<(ComplexSparseMatrix, ComplexSparseMatrix)>, // (L, L†)
    pub ldl_sum: ComplexSparseMatrix,
}

impl RhsOps {
    pub fn new(model: &LindbladModel) -> Self {
        let d = model.dim();
        let mut ldl_sum = ComplexSparseMatrix::zeros(d, d);
        let mut jumps = Vec::with_capacity(model.jumps.len());
        for jump in &model.jumps {
            let dag = jump.dagger();
            ldl_sum = ldl_sum
                .add(&dag.matmul(jump).expect("L†L dims"))
                .expect("ldl sum dims");
            jumps.push((jump.clone(), dag));
        }
        Self {
            h: model.hamiltonian.clone(),
            jumps,
            ldl_sum,
        }
    }

    /// 𝓛[ρ] on a dense density matrix.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let minus_i = C64::new(0.0, -1.0);
        let h_rho = self.h.mul_dense(rho);
        let rho_h = self.h.rmul_dense(rho);
        let mut out = (&h_rho - &rho_h).mapv(|z| z * minus_i);
        let g_rho = self.ldl_sum.mul_dense(rho);
        let rho_g = self.ldl_sum.rmul_dense(rho);
        out.zip_mut_with(&(&g_rho + &rho_g), |o, g| *o -= 0.5 * g);
        for (l, ldag) in &self.jumps {
            if l.nnz() == 0 {
                continue;
            }
            let rho_ldag = ldag.rmul_dense(rho);
            out += &l.mul_dense(&rho_ldag);
        }
        out
    }
}

/// 𝓛[ρ]: −i[H,ρ] + Σ_μ (LρL† − ½L†Lρ − ½ρL†L). Hermitian and traceless.
pub fn lindblad_rhs(
    model: &LindbladModel,
    rho: &DensityMatrix,
) -> Result<ComplexSparseMatrix, LiouvilleError> {
    if rho.dim() != model.dim() {
        return Err(LiouvilleError::Operator(OperatorError::DimensionMismatch {
            context: "lindblad_rhs",
            lhs_rows: model.dim(),
            lhs_cols: model.dim(),
            rhs_rows: rho.dim(),
            rhs_cols: rho.dim(),
        }));
    }
    let ops = RhsOps::new(model);
    Ok(ComplexSparseMatrix::from_dense(&ops.apply(&rho.dense())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMethod {
    Rk4,
}

impl std::fmt::Display for IntegrationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntegrationMethod::Rk4 => write!(f, "rk4"),
        }
    }
}

/// Time-series output of an integration run.
#[derive(Debug, Clone)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    pub states: Option<Vec<DensityMatrix>>,
    pub observable_names: Vec<String>,
    /// Row per sample time, column per observable (real parts).
    pub observable_values: Array2<f64>,
    pub method: IntegrationMethod,
    pub dt: f64,
}

impl EvolutionRecord {
    /// CSV with a time column followed by one column per observable,
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for name in &self.observable_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            write!(out, "{}", fmt_float(*t)).unwrap();
            for j in 0..self.observable_names.len() {
                write!(out, ",{}", fmt_float(self.observable_values[(i, j)])).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// 17-significant-digit, locale-independent float formatting.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub n_samples: usize,
    pub observables: Vec<(String, ComplexSparseMatrix)>,
    pub keep_states: bool,
    /// Check positivity (an eigendecomposition) at each stored sample.
    pub check_positivity: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            n_samples: 101,
            observables: Vec::new(),
            keep_states: true,
            check_positivity: true,
        }
    }
}

/// Fixed-step RK4 integration of the master equation.
///
/// Every stored sample re-satisfies the density-matrix invariants; trace and
/// Hermiticity are additionally checked at every step and a violation beyond
/// tolerance aborts with a diagnostic.
pub fn integrate(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
    method: IntegrationMethod,
    opts: &IntegrateOptions,
) -> Result<EvolutionRecord, LiouvilleError> {
    if dt <= 0.0 {
        return Err(LiouvilleError::NonConvergence("dt must be positive".into()));
    }
    if rho0.dim() != model.dim() {
        return Err(LiouvilleError::Operator(OperatorError::DimensionMismatch {
            context: "integrate",
            lhs_rows: model.dim(),
            lhs_cols: model.dim(),
            rhs_rows: rho0.dim(),
            rhs_cols: rho0.dim(),
        }));
    }
    let IntegrationMethod::Rk4 = method;
    let ops = RhsOps::new(model);
    let n_samples = opts.n_samples.max(2);
    let sample_times: Vec<f64> = (0..n_samples)
        .map(|k| t_final * k as f64 / (n_samples - 1) as f64)
        .collect();

    let mut rho = rho0.dense();
    let mut t = 0.0f64;
    let mut times = Vec::with_capacity(n_samples);
    let mut states = if opts.keep_states {
        Some(Vec::with_capacity(n_samples))
    } else {
        None
    };
    let mut values = Vec::with_capacity(n_samples * opts.observables.len());

    let mut record =
        |t: f64, rho: &Array2<C64>, states: &mut Option<Vec<DensityMatrix>>, values: &mut Vec<f64>| -> Result<(), LiouvilleError> {
            times.push(t);
            for (_, op) in &opts.observables {
                values.push(crate::operators::expectation_dense(op, rho).re);
            }
            if opts.check_positivity {
                let min_eig = eigen::eigvalsh(rho)?
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                if min_eig < POSITIVITY_TOL {
                    return Err(LiouvilleError::InvariantViolation {
                        kind: "positivity",
                        value: min_eig,
                        time: t,
                    });
                }
            }
            if let Some(list) = states {
                list.push(DensityMatrix::new_unchecked(
                    ComplexSparseMatrix::from_dense(rho),
                ));
            }
            Ok(())
        };

    record(0.0, &rho, &mut states, &mut values)?;
    for &t_target in &sample_times[1..] {
        while t < t_target - 1e-12 * dt.max(1.0) {
            let h = dt.min(t_target - t);
            rk4_step(&ops, &mut rho, h);
            t += h;
            check_step_invariants(&rho, t)?;
        }
        t = t_target;
        record(t, &rho, &mut states, &mut values)?;
    }

    let n_obs = opts.observables.len();
    Ok(EvolutionRecord {
        times,
        states,
        observable_names: opts.observables.iter().map(|(n, _)| n.clone()).collect(),
        observable_values: Array2::from_shape_vec((n_samples, n_obs), values)
            .expect("sample grid shape"),
        method,
        dt,
    })
}

pub(crate) fn rk4_step(ops: &RhsOps, rho: &mut Array2<C64>, h: f64) {
    let k1 = ops.apply(rho);
    let mut stage = rho.clone();
    stage.zip_mut_with(&k1, |s, k| *s += 0.5 * h * k);
    let k2 = ops.apply(&stage);
    stage.assign(rho);
    stage.zip_mut_with(&k2, |s, k| *s += 0.5 * h * k);
    let k3 = ops.apply(&stage);
    stage.assign(rho);
    stage.zip_mut_with(&k3, |s, k| *s += h * k);
    let k4 = ops.apply(&stage);
    let w = h / 6.0;
    ndarray::Zip::from(rho)
        .and(&k1)
        .and(&k2)
        .and(&k3)
        .and(&k4)
        .for_each(|r, &a, &b, &c, &d| {
            *r += w * (a + 2.0 * b + 2.0 * c + d);
        });
}

fn check_step_invariants(rho: &Array2<C64>, t: f64) -> Result<(), LiouvilleError> {
    let d = rho.nrows();
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..d {
        tr += rho[(i, i)];
    }
    let tr_err = (tr - C64::new(1.0, 0.0)).norm();
    if tr_err > 1e-8 {
        return Err(LiouvilleError::InvariantViolation {
            kind: "trace",
            value: tr_err,
            time: t,
        });
    }
    let mut defect = 0.0f64;
    for r in 0..d {
        for c in r..d {
            defect = defect.max((rho[(r, c)] - rho[(c, r)].conj()).norm());
        }
    }
    if defect > HERMITICITY_TOL {
        return Err(LiouvilleError::InvariantViolation {
            kind: "hermiticity",
            value: defect,
            time: t,
        });
    }
    Ok(())
}

/// Σ|eigenvalues| of a Hermitian matrix; rejects non-Hermitian input.
pub fn trace_norm(m: &ComplexSparseMatrix) -> Result<f64, LiouvilleError> {
    if !m.is_square() {
        return Err(LiouvilleError::NonHermitian(f64::INFINITY));
    }
    let defect = m.hermitian_defect();
    if defect > 1e-10 * m.max_abs().max(1.0) {
        return Err(LiouvilleError::NonHermitian(defect));
    }
    Ok(eigen::hermitian_trace_norm(&m.to_dense())?)
}

/// Σ|eigenvalues| without a Hermiticity gate (internal hot path).
pub(crate) fn trace_norm_dense(m: &Array2<C64>) -> f64 {
    eigen::hermitian_trace_norm(m).expect("Hermitian eigendecomposition")
}

/// ½‖ρ − σ‖₁.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let diff = &a.dense() - &b.dense();
    0.5 * trace_norm_dense(&diff)
}

/// Hermitize, fix the sign so the trace is positive, and normalize to unit
/// trace. Applied to devectorized eigenvectors, which are defined up to a
/// complex scale.
pub(crate) fn hermitize_normalize(x: &Array2<C64>) -> Result<Array2<C64>, LiouvilleError> {
    let xdag = x.t().mapv(|z| z.conj());
    let mut h = (x + &xdag).mapv(|z| 0.5 * z);
    let tr: C64 = (0..h.nrows()).map(|i| h[(i, i)]).sum();
    if tr.norm() < 1e-12 {
        return Err(LiouvilleError::NotDensityMatrix(
            "devectorized eigenvector has (near-)zero trace".into(),
        ));
    }
    h.mapv_inplace(|z| z / tr);
    Ok(h)
}

pub(crate) fn vec_identity(d: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        v[i * d + i] = C64::new(1.0, 0.0);
    }
    v
}

/// Support of an `Array1` API for pure-state vectors used by callers.
pub fn array_from_vec(v: Vec<C64>) -> Array1<C64> {
    Array1::from_vec(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{Boundary, LatticeGraph};
    use crate::models::build_dissipative_ising;
    use crate::operators::{pauli, PauliKind};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn decaying_qubit(gamma: f64) -> LindbladModel {
        let lattice = LatticeGraph::chain(1, Boundary::Open).unwrap();
        build_dissipative_ising(lattice, 0.0, 0.0, gamma).unwrap()
    }

    #[test]
    fn density_matrix_validation() {
        let good = ComplexSparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, c(0.5, 0.0)), (1, 1, c(0.5, 0.0))],
        )
        .unwrap();
        assert!(DensityMatrix::new(good).is_ok());

        let bad_trace =
            ComplexSparseMatrix::from_triplets(2, 2, vec![(0, 0, c(0.9, 0.0))]).unwrap();
        assert!(DensityMatrix::new(bad_trace).is_err());

        let non_psd = ComplexSparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, c(1.5, 0.0)), (1, 1, c(-0.5, 0.0))],
        )
        .unwrap();
        assert!(DensityMatrix::new(non_psd).is_err());
    }

    #[test]
    fn rhs_decaying_qubit() {
        let model = decaying_qubit(1.0);
        let up = DensityMatrix::basis_state(2, 0);
        let rhs = lindblad_rhs(&model, &up).unwrap();
        // γ(|down><down| − |up><up|)
        assert!((rhs.get(0, 0) - c(-1.0, 0.0)).norm() < 1e-13);
        assert!((rhs.get(1, 1) - c(1.0, 0.0)).norm() < 1e-13);
        assert!(rhs.trace().norm() < 1e-13);
        assert!(rhs.hermitian_defect() < 1e-13);

        // steady state is a fixed point
        let down = DensityMatrix::basis_state(2, 1);
        assert!(lindblad_rhs(&model, &down).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn vectorize_roundtrip() {
        let m = ComplexSparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, c(1.0, -2.0)), (1, 0, c(0.5, 0.0))],
        )
        .unwrap();
        let v = vectorize(&m);
        let back = devectorize_sparse(&v).unwrap();
        assert_eq!(back, m);
        assert!(devectorize(&[c(1.0, 0.0); 3]).is_err());
    }

    #[test]
    fn vectorized_trace_functional() {
        let d = 3;
        let rho = DensityMatrix::maximally_mixed(d);
        let v = vectorize(rho.matrix());
        let tr: C64 = vec_identity(d)
            .iter()
            .zip(v.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!((tr - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn superoperator_spectrum_decaying_qubit() {
        let model = decaying_qubit(1.0);
        let sup = build_superoperator(&model);
        let (vals, _) = eigen::eig_general(&sup.matrix.to_dense()).unwrap();
        let mut mags: Vec<f64> = vals.iter().map(|v| v.re).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [-1.0, -0.5, -0.5, 0.0];
        for (got, want) in mags.iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        for v in vals.iter() {
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn superoperator_matches_rhs() {
        let lattice = LatticeGraph::chain(2, Boundary::Open).unwrap();
        let model = build_dissipative_ising(lattice, 1.3, 2.1, 0.7).unwrap();
        let sup = build_superoperator(&model);
        // random-ish valid density matrix via normalized Gram matrix
        let d = model.dim();
        let g = Array2::from_shape_fn((d, d), |(r, cidx)| {
            c(((r * 7 + cidx * 3) % 5) as f64 - 2.0, ((r + 2 * cidx) % 3) as f64 - 1.0)
        });
        let gram = g.dot(&g.t().mapv(|z| z.conj()));
        let tr: C64 = (0..d).map(|i| gram[(i, i)]).sum();
        let rho_dense = gram.mapv(|z| z / tr);
        let rho = DensityMatrix::from_dense(&rho_dense).unwrap();

        let rhs = lindblad_rhs(&model, &rho).unwrap().to_dense();
        let via_sup = sup.apply_dense(&rho_dense).unwrap();
        let mut max_diff = 0.0f64;
        for r in 0..d {
            for cidx in 0..d {
                max_diff = max_diff.max((rhs[(r, cidx)] - via_sup[(r, cidx)]).norm());
            }
        }
        assert!(max_diff < 1e-12, "superoperator/rhs mismatch {max_diff}");

        // trace preservation: (vec I)† L♯ vec(ρ) = 0
        let lv = sup.matrix.matvec(&vectorize(rho.matrix()));
        let tr_rate: C64 = vec_identity(d)
            .iter()
            .zip(lv.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!(tr_rate.norm() < 1e-10);
    }

    #[test]
    fn integrate_decaying_qubit_analytic() {
        let gamma = 1.0;
        let model = decaying_qubit(gamma);
        let up = DensityMatrix::basis_state(2, 0);
        let opts = IntegrateOptions {
            n_samples: 21,
            ..Default::default()
        };
        let rec = integrate(&model, &up, 2.0, 1e-3, IntegrationMethod::Rk4, &opts).unwrap();
        let states = rec.states.as_ref().unwrap();
        for (i, t) in rec.times.iter().enumerate() {
            let p_up = states[i].matrix().get(0, 0).re;
            assert!(
                (p_up - (-gamma * t).exp()).abs() < 1e-8,
                "t={t}: {p_up} vs {}",
                (-gamma * t).exp()
            );
        }
    }

    #[test]
    fn integrate_rabi_oscillation() {
        // γ=0, H=(h/2)σx: ⟨σz⟩(t) = cos(h t) from |up⟩
        let h = 1.7;
        let lattice = LatticeGraph::chain(1, Boundary::Open).unwrap();
        let model = build_dissipative_ising(lattice, h, 0.0, 0.0).unwrap();
        let up = DensityMatrix::basis_state(2, 0);
        let opts = IntegrateOptions {
            n_samples: 11,
            observables: vec![("sz".into(), pauli(PauliKind::Z))],
            keep_states: false,
            check_positivity: true,
        };
        let rec = integrate(&model, &up, 5.0, 5e-4, IntegrationMethod::Rk4, &opts).unwrap();
        for (i, t) in rec.times.iter().enumerate() {
            assert!(
                (rec.observable_values[(i, 0)] - (h * t).cos()).abs() < 1e-6,
                "t={t}"
            );
        }
    }

    #[test]
    fn integrate_purity_conserved_unitary() {
        // unitarity witness: γ=0 conserves tr ρ²
        let lattice = LatticeGraph::chain(2, Boundary::Open).unwrap();
        let model = build_dissipative_ising(lattice, 1.0, 3.0, 0.0).unwrap();
        let mut psi = vec![c(0.0, 0.0); 4];
        psi[0] = c(0.5f64.sqrt(), 0.0);
        psi[3] = c(0.0, 0.5f64.sqrt());
        let rho0 = DensityMatrix::from_pure(&psi).unwrap();
        let rec = integrate(
            &model,
            &rho0,
            1.0,
            1e-3,
            IntegrationMethod::Rk4,
            &IntegrateOptions::default(),
        )
        .unwrap();
        for s in rec.states.as_ref().unwrap() {
            assert!((s.purity() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn richardson_halving_dt() {
        // local truncation O(dt^5) → halving dt shrinks max error ~16x
        let gamma = 1.0;
        let model = decaying_qubit(gamma);
        let up = DensityMatrix::basis_state(2, 0);
        let err = |dt: f64| {
            let opts = IntegrateOptions {
                n_samples: 6,
                ..Default::default()
            };
            let rec = integrate(&model, &up, 1.0, dt, IntegrationMethod::Rk4, &opts).unwrap();
            rec.states
                .unwrap()
                .iter()
                .zip(rec.times.iter())
                .map(|(s, t)| (s.matrix().get(0, 0).re - (-gamma * t).exp()).abs())
                .fold(0.0f64, f64::max)
        };
        let e1 = err(0.05);
        let e2 = err(0.025);
        let ratio = e1 / e2;
        assert!(
            (8.0..40.0).contains(&ratio),
            "expected ~16x error reduction, got {ratio}"
        );
    }

    #[test]
    fn trace_norm_basics() {
        let diag = ComplexSparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, c(1.0, 0.0)), (1, 1, c(-1.0, 0.0))],
        )
        .unwrap();
        assert!((trace_norm(&diag).unwrap() - 2.0).abs() < 1e-14);

        let rho = DensityMatrix::maximally_mixed(3);
        assert!((trace_norm(rho.matrix()).unwrap() - 1.0).abs() < 1e-14);

        let non_herm =
            ComplexSparseMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0))]).unwrap();
        assert!(trace_norm(&non_herm).is_err());
    }

    #[test]
    fn csv_roundtrip_17_digits() {
        let rec = EvolutionRecord {
            times: vec![0.0, 0.1],
            states: None,
            observable_names: vec!["sz".into()],
            observable_values: Array2::from_shape_vec((2, 1), vec![1.0 / 3.0, -2.0 / 7.0])
                .unwrap(),
            method: IntegrationMethod::Rk4,
            dt: 0.1,
        };
        let csv = rec.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "time,sz");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
