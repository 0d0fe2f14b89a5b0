//! Single-site and cluster mean-field steady states with stability analysis.
//!
//! Mean-field decoupling replaces every neighbor operator in an interaction
//! term by its expectation value, producing nonlinear self-consistent
//! single-site master equations
//!     dρᵢ/dt = −i[Hᵢ^MF, ρᵢ] + 𝒟ᵢ(ρᵢ).
//! The fixed point is found by damped iteration of local steady-state solves.
//! Stability of a solution follows from linearizing the dynamics in δρᵢ
//! around the fixed point: the local Liouvillian Jacobian plus rank-one
//! neighbor couplings weighted by a mode factor c = Σ_axes z_a cos(k_a),
//! sampled at k ∈ {0, π} per axis (uniform and staggered perturbations).

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::eigen::{self, EigenError};
use crate::hilbert::{Boundary, HilbertSpace, LatticeGraph};
use crate::liouville::{
    devectorize, fmt_float, hermitize_normalize, superoperator_matrix, trace_norm_dense,
    vectorize_dense, DensityMatrix, LiouvilleError,
};
use crate::models::{InteractionTerm, LindbladModel, ModelError, SiteTerms};
use crate::operators::{expectation_dm, partial_trace_dense};
use crate::sparse::{ComplexSparseMatrix, OperatorError};
use crate::steady::steady_state_eigen;
use crate::trajectories::substream_rng;

#[derive(Debug, Error)]
pub enum MeanFieldError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Liouville(#[from] LiouvilleError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("stability analysis requires a converged solution")]
    NotConverged,
    #[error("cluster dimension {dim} exceeds the dense-solver cap {cap}")]
    ClusterTooLarge { dim: usize, cap: usize },
    #[error("cluster mean-field needs a shaped lattice: {0}")]
    ClusterShape(String),
}

/// Product of single-site density matrices; the shared ansatz of the
/// mean-field and variational modules.
#[derive(Debug, Clone)]
pub struct ProductState {
    pub sites: Vec<DensityMatrix>,
}

impl ProductState {
    pub fn uniform(n_sites: usize, factor: DensityMatrix) -> Self {
        Self {
            sites: vec![factor; n_sites],
        }
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        DensityMatrix::product(&self.sites)
    }

    /// Max over sites of the local trace distance.
    pub fn distance(&self, other: &Self) -> f64 {
        self.sites
            .iter()
            .zip(other.sites.iter())
            .map(|(a, b)| crate::liouville::trace_distance(a, b))
            .fold(0.0, f64::max)
    }

    /// Mean local filling: (1+⟨σz⟩)/2 for qubits, ⟨n⟩ for Fock sites.
    pub fn filling(&self) -> f64 {
        let mut total = 0.0;
        for site in &self.sites {
            let d = site.dim();
            if d == 2 {
                total += site.matrix().get(0, 0).re; // up-spin population
            } else {
                total += (0..d).map(|k| k as f64 * site.matrix().get(k, k).re).sum::<f64>();
            }
        }
        total / self.sites.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct MfOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Linear mixing weight on the updated factor.
    pub damping: f64,
}

impl Default for MfOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 4000,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MfSolution {
    pub state: ProductState,
    /// Max over sites of trace_norm(mf_rhs) at the returned state.
    pub residual: f64,
    pub stable: Option<bool>,
    pub stability_spectrum: Vec<C64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Mean-field Hamiltonian of `site`: local terms plus every incident
/// interaction with the neighbor operator replaced by its expectation.
pub fn mf_hamiltonian(
    model: &LindbladModel,
    state: &ProductState,
    site: usize,
) -> Result<ComplexSparseMatrix, MeanFieldError> {
    let mut h = model.site_terms[site].hamiltonian.clone();
    for term in &model.interactions {
        if term.edge.0 == site {
            let field = expectation_dm(&term.op_b, state.sites[term.edge.1].matrix())?;
            h = h.add(&term.op_a.scale(C64::new(term.coeff, 0.0) * field))?;
        } else if term.edge.1 == site {
            let field = expectation_dm(&term.op_a, state.sites[term.edge.0].matrix())?;
            h = h.add(&term.op_b.scale(C64::new(term.coeff, 0.0) * field))?;
        }
    }
    Ok(h)
}

fn local_rhs_dense(
    h: &ComplexSparseMatrix,
    jumps: &[ComplexSparseMatrix],
    rho: &Array2<C64>,
) -> Array2<C64> {
    let minus_i = C64::new(0.0, -1.0);
    let h_rho = h.mul_dense(rho);
    let rho_h = h.rmul_dense(rho);
    let mut out = (&h_rho - &rho_h).mapv(|z| z * minus_i);
    for l in jumps {
        if l.nnz() == 0 {
            continue;
        }
        let ldag = l.dagger();
        let g = ldag.matmul(l).expect("L†L dims");
        let g_rho = g.mul_dense(rho);
        let rho_g = g.rmul_dense(rho);
        out.zip_mut_with(&(&g_rho + &rho_g), |o, x| *o -= 0.5 * x);
        out += &l.mul_dense(&ldag.rmul_dense(rho));
    }
    out
}

/// dρᵢ/dt of the mean-field master equation for one site.
pub fn mf_rhs(
    model: &LindbladModel,
    state: &ProductState,
    site: usize,
) -> Result<ComplexSparseMatrix, MeanFieldError> {
    let h = mf_hamiltonian(model, state, site)?;
    let rho = state.sites[site].dense();
    Ok(ComplexSparseMatrix::from_dense(&local_rhs_dense(
        &h,
        &model.site_terms[site].jumps,
        &rho,
    )))
}

/// Steady state of a local Liouvillian, via a trace-constrained linear solve
/// with a dense-diagonalization fallback.
fn local_steady_state(
    h: &ComplexSparseMatrix,
    jumps: &[ComplexSparseMatrix],
) -> Result<DensityMatrix, MeanFieldError> {
    let d = h.rows();
    let lsup = superoperator_matrix(h, jumps).to_dense();
    let n = d * d;
    // replace the first row with the trace functional; solve A x = e0
    let mut a = lsup.clone();
    for c in 0..n {
        a[(0, c)] = C64::new(0.0, 0.0);
    }
    for i in 0..d {
        a[(0, i * d + i)] = C64::new(1.0, 0.0);
    }
    let mut b = vec![C64::new(0.0, 0.0); n];
    b[0] = C64::new(1.0, 0.0);
    if let Ok(solver) = eigen::LuSolver::new(a) {
        if let Ok(x) = solver.solve(&b) {
            let rho = hermitize_normalize(&devectorize(&x)?)?;
            // guard against ill-conditioned solves far from a valid state
            let residual = {
                let lv = lsup.dot(&ndarray::Array1::from_vec(vectorize_dense(&rho)));
                lv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
            };
            if residual < 1e-8 {
                if let Ok(dm) = DensityMatrix::from_dense(&rho) {
                    return Ok(dm);
                }
            }
        }
    }
    // fallback: eigenvector of the local Liouvillian with smallest |λ|
    let (vals, vecs) = eigen::eig_general(&lsup)?;
    let k = (0..n)
        .min_by(|&a, &b| vals[a].norm().partial_cmp(&vals[b].norm()).unwrap())
        .expect("nonempty spectrum");
    let v: Vec<C64> = (0..n).map(|i| vecs[(i, k)]).collect();
    let rho = hermitize_normalize(&devectorize(&v)?)?;
    Ok(DensityMatrix::from_dense(&rho)?)
}

/// Damped self-consistent iteration to the mean-field fixed point.
///
/// Each sweep solves every site's local master equation exactly with frozen
/// mean fields, then mixes. Converged when both the successive field change
/// and the residual drop below `tol`; exceeding `max_iter` returns with the
/// `converged` flag cleared (often a limit cycle or a bistable-window edge).
pub fn mf_steady(
    model: &LindbladModel,
    init: &ProductState,
    opts: &MfOptions,
) -> Result<MfSolution, MeanFieldError> {
    let n_sites = model.n_sites();
    let mut state = init.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut new_sites = Vec::with_capacity(n_sites);
        for site in 0..n_sites {
            let h = mf_hamiltonian(model, &state, site)?;
            let local = local_steady_state(&h, &model.site_terms[site].jumps)?;
            new_sites.push(local);
        }
        let mut change = 0.0f64;
        let mixed: Vec<DensityMatrix> = state
            .sites
            .iter()
            .zip(new_sites.iter())
            .map(|(old, new)| {
                let m = old
                    .matrix()
                    .scale(C64::new(1.0 - opts.damping, 0.0))
                    .add(&new.matrix().scale(C64::new(opts.damping, 0.0)))
                    .expect("factor dims");
                let dm = DensityMatrix::new_unchecked(m);
                change = change.max(crate::liouville::trace_distance(old, &dm));
                dm
            })
            .collect();
        state = ProductState { sites: mixed };
        if change < opts.tol {
            let residual = mf_residual(model, &state)?;
            if residual < opts.tol.max(1e-12) * 10.0 {
                converged = true;
                break;
            }
        }
    }
    let residual = mf_residual(model, &state)?;
    Ok(MfSolution {
        state,
        residual,
        stable: None,
        stability_spectrum: Vec::new(),
        iterations,
        converged,
    })
}

fn mf_residual(model: &LindbladModel, state: &ProductState) -> Result<f64, MeanFieldError> {
    let mut worst = 0.0f64;
    for site in 0..model.n_sites() {
        let rhs = mf_rhs(model, state, site)?;
        worst = worst.max(trace_norm_dense(&rhs.to_dense()));
    }
    Ok(worst)
}

/// Random single-site factor: uniform Bloch-ball state for qubits, a
/// normalized Ginibre matrix otherwise.
pub fn random_site_factor(dim: usize, rng: &mut ChaCha12Rng) -> DensityMatrix {
    if dim == 2 {
        let u: f64 = rng.random();
        let r = 0.98 * u.cbrt();
        let cos_t: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let sin_t = (1.0 - cos_t * cos_t).sqrt();
        let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let (nx, ny, nz) = (r * sin_t * phi.cos(), r * sin_t * phi.sin(), r * cos_t);
        bloch_state(nx, ny, nz)
    } else {
        let g = Array2::from_shape_fn((dim, dim), |_| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let gram = g.dot(&g.t().mapv(|z| z.conj()));
        let tr: C64 = (0..dim).map(|i| gram[(i, i)]).sum();
        DensityMatrix::new_unchecked(ComplexSparseMatrix::from_dense(&gram.mapv(|z| z / tr)))
    }
}

/// ρ = (I + n·σ)/2.
pub fn bloch_state(nx: f64, ny: f64, nz: f64) -> DensityMatrix {
    let m = ndarray::array![
        [
            C64::new(0.5 * (1.0 + nz), 0.0),
            C64::new(0.5 * nx, -0.5 * ny)
        ],
        [
            C64::new(0.5 * nx, 0.5 * ny),
            C64::new(0.5 * (1.0 - nz), 0.0)
        ]
    ];
    DensityMatrix::new_unchecked(ComplexSparseMatrix::from_dense(&m))
}

#[derive(Debug, Clone)]
pub struct MultistartOutcome {
    pub solutions: Vec<MfSolution>,
    pub non_converged: usize,
}

/// Distinctness threshold for deduplicating fixed points.
pub const DEDUP_DISTANCE: f64 = 1e-4;

/// Run `mf_steady` from random initial product states; converged solutions
/// are deduplicated by pairwise trace distance, non-converged starts dropped
/// with a count.
pub fn mf_multistart(
    model: &LindbladModel,
    n_starts: usize,
    rng: &mut ChaCha12Rng,
    opts: &MfOptions,
) -> Result<MultistartOutcome, MeanFieldError> {
    let n_sites = model.n_sites();
    let mut solutions: Vec<MfSolution> = Vec::new();
    let mut non_converged = 0;
    for _ in 0..n_starts {
        let init = ProductState {
            sites: (0..n_sites)
                .map(|s| random_site_factor(model.space.site_dim(s), rng))
                .collect(),
        };
        let sol = mf_steady(model, &init, opts)?;
        if !sol.converged {
            non_converged += 1;
            continue;
        }
        if solutions
            .iter()
            .all(|s| s.state.distance(&sol.state) > DEDUP_DISTANCE)
        {
            solutions.push(sol);
        }
    }
    solutions.sort_by(|a, b| {
        a.state
            .filling()
            .partial_cmp(&b.state.filling())
            .expect("finite filling")
    });
    Ok(MultistartOutcome {
        solutions,
        non_converged,
    })
}

/// Mode factors c = Σ_axes z_a cos(k_a) at k ∈ {0, π} per axis.
fn mode_factors(lattice: &LatticeGraph) -> Vec<f64> {
    let z = lattice.coordination() as f64;
    if z == 0.0 {
        return vec![0.0];
    }
    let n_axes = match lattice.shape() {
        Some((lx, ly)) => (lx > 1) as usize + (ly > 1) as usize,
        None => 1,
    };
    let z_axis = z / n_axes.max(1) as f64;
    let mut cs = Vec::new();
    for combo in 0..(1usize << n_axes) {
        let c: f64 = (0..n_axes)
            .map(|a| if combo >> a & 1 == 1 { -z_axis } else { z_axis })
            .sum();
        if !cs.iter().any(|&x: &f64| (x - c).abs() < 1e-12) {
            cs.push(c);
        }
    }
    cs
}

/// Linear stability of a converged mean-field solution.
///
/// Builds the linearized evolution of a translation-invariant perturbation
/// δρ e^{ik·r}: J(c) = L_loc♯ + c·K with K the rank-one neighbor coupling
/// through the mean fields. Stable iff all eigenvalue real parts are ≤ 1e−10
/// for every mode factor, excluding the trace-preserving zero mode.
pub fn mf_stability(
    model: &LindbladModel,
    solution: &MfSolution,
) -> Result<(bool, Vec<C64>), MeanFieldError> {
    if !solution.converged {
        return Err(MeanFieldError::NotConverged);
    }
    let site = (0..model.n_sites())
        .max_by_key(|&s| model.lattice.degree(s))
        .unwrap_or(0);
    let rho_star = solution.state.sites[site].dense();
    let d = rho_star.nrows();
    let n = d * d;

    let h_mf = mf_hamiltonian(model, &solution.state, site)?;
    let l_loc = superoperator_matrix(&h_mf, &model.site_terms[site].jumps).to_dense();

    // rank-one coupling K: δρ_neighbor ↦ −i g [P, ρ*] tr(Q δρ)
    let mut k_mat = Array2::<C64>::zeros((n, n));
    if let Some(&edge) = model
        .lattice
        .edges()
        .iter()
        .find(|&&(a, b)| a == site || b == site)
    {
        for term in model.interactions.iter().filter(|t| t.edge == edge) {
            let (p, q) = if edge.0 == site {
                (&term.op_a, &term.op_b)
            } else {
                (&term.op_b, &term.op_a)
            };
            let p_dense = p.to_dense();
            let comm = p_dense.dot(&rho_star) - rho_star.dot(&p_dense);
            let col = vectorize_dense(&comm); // vec(−i g [P, ρ*]) up to scale
            let g = C64::new(0.0, -term.coeff);
            // tr(Q δρ) = Σ_rc Q_rc δρ_cr = vec(Qᵀ)ᵀ vec(δρ)
            let qt = q.transpose().to_dense();
            let row = vectorize_dense(&qt);
            for i in 0..n {
                if col[i] == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    k_mat[(i, j)] += g * col[i] * row[j];
                }
            }
        }
    }

    let mut spectrum = Vec::new();
    let mut stable = true;
    let scale = l_loc.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    for c in mode_factors(&model.lattice) {
        let j_mat = &l_loc + &k_mat.mapv(|z| z * C64::new(c, 0.0));
        let (vals, _) = eigen::eig_general(&j_mat)?;
        let mut vals: Vec<C64> = vals.to_vec();
        // drop the trace-preserving zero mode (one per mode factor)
        if let Some(k) = (0..vals.len())
            .min_by(|&a, &b| vals[a].norm().partial_cmp(&vals[b].norm()).unwrap())
        {
            if vals[k].norm() <= 1e-8 * scale {
                vals.remove(k);
            }
        }
        if vals.iter().any(|v| v.re > 1e-10) {
            stable = false;
        }
        spectrum.extend(vals);
    }
    Ok((stable, spectrum))
}

/// A converged cluster mean-field record.
#[derive(Debug, Clone)]
pub struct ClusterSolution {
    pub site_factors: Vec<DensityMatrix>,
    pub cluster_state: DensityMatrix,
    /// Last self-consistency field change.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Dense-solver cap for the cluster Hilbert space dimension.
pub const CLUSTER_DIM_CAP: usize = 20;

/// Cluster mean field: exact Liouvillian treatment inside a (cx × cy)
/// cluster tiling the lattice, mean-field boundary terms from the cluster's
/// own edge sites, solved self-consistently. A cluster spanning the full
/// periodic lattice reproduces the exact steady state (the wrap edges become
/// real edges).
pub fn cluster_mf_steady(
    model: &LindbladModel,
    cluster_dims: (usize, usize),
    opts: &MfOptions,
) -> Result<ClusterSolution, MeanFieldError> {
    let (cx, cy) = cluster_dims;
    if cx == 0 || cy == 0 {
        return Err(MeanFieldError::ClusterShape("zero cluster extent".into()));
    }
    let shape = model
        .lattice
        .shape()
        .ok_or_else(|| MeanFieldError::ClusterShape("model lattice has no shape".into()))?;
    let local_dim = model.space.site_dim(0);
    let n_cluster = cx * cy;
    let cluster_total: usize = local_dim.pow(n_cluster as u32);
    if cluster_total > CLUSTER_DIM_CAP {
        return Err(MeanFieldError::ClusterTooLarge {
            dim: cluster_total,
            cap: CLUSTER_DIM_CAP,
        });
    }
    // templates of one representative edge
    let rep_edge = model.lattice.edges().first().copied();
    let templates: Vec<&InteractionTerm> = match rep_edge {
        Some(e) => model.interactions.iter().filter(|t| t.edge == e).collect(),
        None => Vec::new(),
    };

    let exact_full = (cx, cy) == shape && model.lattice.boundary() == Boundary::Periodic;
    let site = |x: usize, y: usize| y * cx + x;

    // internal edges and wrap pairs (cluster-boundary MF couplings)
    let mut internal_edges = Vec::new();
    let mut wrap_pairs: Vec<(usize, usize)> = Vec::new();
    for y in 0..cy {
        for x in 0..cx {
            if x + 1 < cx {
                internal_edges.push((site(x, y), site(x + 1, y)));
            } else if cx > 1 || shape.0 > 1 {
                wrap_pairs.push((site(x, y), site(0, y)));
            }
            if y + 1 < cy {
                internal_edges.push((site(x, y), site(x, y + 1)));
            } else if cy > 1 || shape.1 > 1 {
                wrap_pairs.push((site(x, y), site(x, 0)));
            }
        }
    }
    if exact_full {
        internal_edges.extend(wrap_pairs.drain(..));
    }
    // canonicalize: a self-wrapped full cluster can re-list an existing edge
    for e in &mut internal_edges {
        *e = (e.0.min(e.1), e.0.max(e.1));
    }
    internal_edges.sort_unstable();
    internal_edges.dedup();

    let space = HilbertSpace::uniform(n_cluster, local_dim)?;
    let base_site_terms: Vec<SiteTerms> = (0..n_cluster)
        .map(|_| model.site_terms[0].clone())
        .collect();

    let mut factors: Vec<DensityMatrix> =
        vec![DensityMatrix::maximally_mixed(local_dim); n_cluster];
    let mut iterations = 0;
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut cluster_state = DensityMatrix::maximally_mixed(cluster_total);

    while iterations < opts.max_iter {
        iterations += 1;
        // boundary mean-field additions per site
        let mut site_terms = base_site_terms.clone();
        for &(a, b) in &wrap_pairs {
            for t in &templates {
                let field_b = expectation_dm(&t.op_b, factors[b].matrix())?;
                site_terms[a].hamiltonian = site_terms[a]
                    .hamiltonian
                    .add(&t.op_a.scale(C64::new(t.coeff, 0.0) * field_b))?;
                let field_a = expectation_dm(&t.op_a, factors[a].matrix())?;
                site_terms[b].hamiltonian = site_terms[b]
                    .hamiltonian
                    .add(&t.op_b.scale(C64::new(t.coeff, 0.0) * field_a))?;
            }
        }
        let interactions: Vec<InteractionTerm> = internal_edges
            .iter()
            .flat_map(|&e| {
                templates.iter().map(move |t| InteractionTerm {
                    edge: e,
                    coeff: t.coeff,
                    op_a: t.op_a.clone(),
                    op_b: t.op_b.clone(),
                })
            })
            .collect();
        let lattice = LatticeGraph::from_edges(
            n_cluster,
            internal_edges.iter().copied(),
            model.lattice.boundary(),
        )?;
        let cluster_model = LindbladModel::assemble(
            space.clone(),
            lattice,
            site_terms,
            interactions,
            model.params.clone(),
        )?;
        let outcome = steady_state_eigen(&cluster_model)?;
        cluster_state = outcome.unique()?.clone();

        let dense = cluster_state.dense();
        let mut new_factors = Vec::with_capacity(n_cluster);
        change = 0.0;
        for s in 0..n_cluster {
            let red = partial_trace_dense(&dense, &space, &[s]);
            let new = DensityMatrix::new_unchecked(ComplexSparseMatrix::from_dense(&red));
            let mixed = factors[s]
                .matrix()
                .scale(C64::new(1.0 - opts.damping, 0.0))
                .add(&new.matrix().scale(C64::new(opts.damping, 0.0)))?;
            let mixed = DensityMatrix::new_unchecked(mixed);
            change = change.max(crate::liouville::trace_distance(&factors[s], &mixed));
            new_factors.push(mixed);
        }
        factors = new_factors;
        if wrap_pairs.is_empty() || change < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(ClusterSolution {
        site_factors: factors,
        cluster_state,
        residual: change,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub mf: MfOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            n_starts: 12,
            seed: 1,
            mf: MfOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub param1: Vec<f64>,
    pub param2: Vec<f64>,
    /// Stable-solution count per grid point; −1 marks a per-point failure.
    pub counts: Array2<i32>,
    /// Filling (n_r) of each stable solution per point.
    pub fillings: Vec<Vec<Vec<f64>>>,
}

impl ScanResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param1,param2,stable_count,n_r\n");
        for (i, p1) in self.param1.iter().enumerate() {
            for (j, p2) in self.param2.iter().enumerate() {
                let nr = self.fillings[i][j]
                    .iter()
                    .map(|x| fmt_float(*x))
                    .collect::<Vec<_>>()
                    .join(";");
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_float(*p1),
                    fmt_float(*p2),
                    self.counts[(i, j)],
                    nr
                ));
            }
        }
        out
    }
}

/// Count stable mean-field solutions over a parameter grid.
///
/// Grid points run independently (and in parallel) with per-point RNG
/// substreams, so the scan is deterministic for a fixed seed.
pub fn scan_stable_count<F>(
    family: F,
    grid1: &[f64],
    grid2: &[f64],
    opts: &ScanOptions,
) -> ScanResult
where
    F: Fn(f64, f64) -> Result<LindbladModel, ModelError> + Sync,
{
    let points: Vec<(usize, usize)> = (0..grid1.len())
        .flat_map(|i| (0..grid2.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<(i32, Vec<f64>)> = points
        .par_iter()
        .enumerate()
        .map(|(flat, &(i, j))| {
            let model = match family(grid1[i], grid2[j]) {
                Ok(m) => m,
                Err(_) => return (-1, Vec::new()),
            };
            let mut rng = substream_rng(opts.seed, flat as u64);
            let outcome = match mf_multistart(&model, opts.n_starts, &mut rng, &opts.mf) {
                Ok(o) => o,
                Err(_) => return (-1, Vec::new()),
            };
            let mut stable_count = 0;
            let mut fillings = Vec::new();
            for sol in &outcome.solutions {
                match mf_stability(&model, sol) {
                    Ok((true, _)) => {
                        stable_count += 1;
                        fillings.push(sol.state.filling());
                    }
                    Ok((false, _)) => {}
                    Err(_) => return (-1, Vec::new()),
                }
            }
            (stable_count, fillings)
        })
        .collect();

    let mut counts = Array2::zeros((grid1.len(), grid2.len()));
    let mut fillings = vec![vec![Vec::new(); grid2.len()]; grid1.len()];
    for (flat, &(i, j)) in points.iter().enumerate() {
        counts[(i, j)] = results[flat].0;
        fillings[i][j] = results[flat].1.clone();
    }
    ScanResult {
        param1: grid1.to_vec(),
        param2: grid2.to_vec(),
        counts,
        fillings,
    }
}
