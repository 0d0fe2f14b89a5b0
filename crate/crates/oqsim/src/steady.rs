//! Non-equilibrium steady-state solvers.
//!
//! Three independent routes to 𝓛[ρ] = 0:
//!  * `steady_state_evolve` — long-time integration until the residual
//!    trace norm drops below tolerance;
//!  * `steady_state_eigen` — the right eigenvector of L♯ with eigenvalue of
//!    smallest magnitude (dense diagonalization for small superoperators,
//!    shift-invert Arnoldi above that);
//!  * `steady_state_ldagl` — the ground state of the Hermitian PSD operator
//!    L♯†L♯ via matrix-free Lanczos iteration.
//!
//! The routes deliberately share no algorithmic machinery so they can serve
//! as cross-method oracles for each other.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::eigen::{self, vnorm};
use crate::liouville::{
    build_superoperator, devectorize, hermitize_normalize, trace_norm_dense, DensityMatrix,
    LiouvilleError, RhsOps,
};
use crate::models::LindbladModel;
use crate::sparse::ComplexSparseMatrix;

/// Superoperator dimension up to which full dense diagonalization is used
/// (and available as a test oracle); larger systems go through shift-invert
/// Arnoldi / Lanczos.
const DENSE_EIG_CAP: usize = 400;

/// Tiny real shift breaking stagnation of the smallest-magnitude target.
const EIGEN_SHIFT: f64 = -1e-9;

#[derive(Debug, Clone)]
pub enum SteadyStateOutcome {
    Unique {
        rho: DensityMatrix,
        /// ‖L♯ v‖₂ of the unit-norm null vector.
        residual: f64,
    },
    /// Multiple steady states: the found null basis, Hermitized but not
    /// trace-normalizable in general. Interpretation is left to the caller.
    Degenerate { basis: Vec<ComplexSparseMatrix> },
}

impl SteadyStateOutcome {
    pub fn unique(&self) -> Result<&DensityMatrix, LiouvilleError> {
        match self {
            SteadyStateOutcome::Unique { rho, .. } => Ok(rho),
            SteadyStateOutcome::Degenerate { basis } => {
                Err(LiouvilleError::DegenerateSteadyState(basis.len()))
            }
        }
    }

    pub fn residual(&self) -> Option<f64> {
        match self {
            SteadyStateOutcome::Unique { residual, .. } => Some(*residual),
            SteadyStateOutcome::Degenerate { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    /// Step size; derived from the operator norms when absent.
    pub dt: Option<f64>,
    pub t_max: f64,
    /// Residual is evaluated every `check_every` steps.
    pub check_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: None,
            t_max: 2000.0,
            check_every: 25,
        }
    }
}

/// Integrate until trace_norm(𝓛[ρ]) < tol; returns the last state and its
/// residual. Exceeding `t_max` is a non-convergence error (slow relaxation or
/// a degenerate steady manifold).
pub fn steady_state_evolve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    tol: f64,
    opts: &EvolveOptions,
) -> Result<(DensityMatrix, f64), LiouvilleError> {
    if tol <= 0.0 {
        return Err(LiouvilleError::NonConvergence("tol must be positive".into()));
    }
    let ops = RhsOps::new(model);
    let scale = model.hamiltonian.inf_norm() + ops.ldl_sum.inf_norm();
    let dt = opts.dt.unwrap_or(0.5 / scale.max(1e-6));
    let mut rho = rho0.dense();
    let mut t = 0.0f64;
    loop {
        for _ in 0..opts.check_every {
            crate::liouville::rk4_step(&ops, &mut rho, dt);
            t += dt;
        }
        let residual = trace_norm_dense(&ops.apply(&rho));
        if residual < tol {
            let rho = DensityMatrix::new(ComplexSparseMatrix::from_dense(&rho))?;
            return Ok((rho, residual));
        }
        if t > opts.t_max {
            return Err(LiouvilleError::NonConvergence(format!(
                "steady_state_evolve: residual {residual:.3e} > tol {tol:.3e} at t_max = {}",
                opts.t_max
            )));
        }
    }
}

/// Steady state as the eigenvector of L♯ with eigenvalue of smallest
/// magnitude. Degenerate zero eigenvalues are reported as a basis.
pub fn steady_state_eigen(model: &LindbladModel) -> Result<SteadyStateOutcome, LiouvilleError> {
    let sup = build_superoperator(model);
    let n = sup.dim();
    let scale = sup.matrix.inf_norm();
    let deg_tol = (1e-12 * scale).max(1e-10);

    let null_vectors: Vec<(C64, Vec<C64>, f64)> = if n <= DENSE_EIG_CAP {
        let (vals, vecs) = eigen::eig_general(&sup.matrix.to_dense())?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| vals[a].norm().partial_cmp(&vals[b].norm()).unwrap());
        let mut found = Vec::new();
        for &k in &order {
            if vals[k].norm() > deg_tol && !found.is_empty() {
                break;
            }
            if vals[k].norm() > deg_tol && found.is_empty() {
                // no eigenvalue within tolerance of zero: take the smallest
                found.push(extract_column(&vecs, k, &sup.matrix, vals[k]));
                break;
            }
            found.push(extract_column(&vecs, k, &sup.matrix, vals[k]));
        }
        found
    } else {
        // shift-invert Arnoldi with deflation rounds to expose degeneracy
        let shift = C64::new(EIGEN_SHIFT, 0.0);
        let mut found: Vec<(C64, Vec<C64>, f64)> = Vec::new();
        let mut deflate: Vec<Vec<C64>> = Vec::new();
        for _round in 0..4 {
            let pairs = eigen::shift_invert_arnoldi(&sup.matrix, shift, 3, 40, &deflate)?;
            let best = &pairs[0];
            if best.value.norm() > deg_tol {
                if found.is_empty() {
                    found.push((best.value, best.vector.clone(), best.residual));
                }
                break;
            }
            found.push((best.value, best.vector.clone(), best.residual));
            deflate.push(best.vector.clone());
        }
        found
    };

    if null_vectors.is_empty() {
        return Err(LiouvilleError::NonConvergence(
            "no candidate null vector found".into(),
        ));
    }
    finish_null_vectors(null_vectors, deg_tol)
}

/// Steady state as the minimal eigenpair of L♯†L♯ (Lanczos iteration).
///
/// The smallest eigenvalue must certify the null vector: λ ≤ 1e−16 · scale
/// with scale = ‖L♯‖∞²; otherwise no steady state exists at tolerance.
pub fn steady_state_ldagl(model: &LindbladModel) -> Result<SteadyStateOutcome, LiouvilleError> {
    let sup = build_superoperator(model);
    let n = sup.dim();
    let ldag = sup.matrix.dagger();
    let apply = |x: &[C64]| ldag.matvec(&sup.matrix.matvec(x));
    let scale = sup.matrix.inf_norm().powi(2);
    let certificate = 1e-16 * scale;

    let mut found: Vec<(C64, Vec<C64>, f64)> = Vec::new();
    let mut deflate: Vec<Vec<C64>> = Vec::new();
    for round in 0..8 {
        let pair = eigen::lanczos_smallest(
            &apply,
            n,
            n.min(180),
            80,
            (1e-14 * scale).max(1e-13),
            &deflate,
        )?;
        let lambda = pair.value.re;
        if lambda > certificate {
            if round == 0 {
                return Err(LiouvilleError::NoNullVector {
                    value: lambda,
                    threshold: certificate,
                });
            }
            break;
        }
        // residual against L♯ itself for reporting
        let lv = sup.matrix.matvec(&pair.vector);
        found.push((C64::new(lambda, 0.0), pair.vector.clone(), vnorm(&lv)));
        deflate.push(pair.vector);
    }
    let deg_tol = certificate;
    finish_null_vectors(found, deg_tol)
}

fn extract_column(
    vecs: &Array2<C64>,
    k: usize,
    l_sharp: &ComplexSparseMatrix,
    value: C64,
) -> (C64, Vec<C64>, f64) {
    let n = vecs.nrows();
    let mut v: Vec<C64> = (0..n).map(|i| vecs[(i, k)]).collect();
    let nrm = vnorm(&v);
    for z in &mut v {
        *z /= nrm;
    }
    let lv = l_sharp.matvec(&v);
    let mut res = 0.0f64;
    for i in 0..n {
        res += (lv[i] - value * v[i]).norm_sqr();
    }
    (value, v, res.sqrt())
}

fn finish_null_vectors(
    mut found: Vec<(C64, Vec<C64>, f64)>,
    _deg_tol: f64,
) -> Result<SteadyStateOutcome, LiouvilleError> {
    if found.len() == 1 {
        let (_, vector, residual) = found.pop().expect("one element");
        let x = devectorize(&vector)?;
        let rho = DensityMatrix::new(ComplexSparseMatrix::from_dense(&hermitize_normalize(&x)?))?;
        Ok(SteadyStateOutcome::Unique { rho, residual })
    } else {
        let mut basis = Vec::with_capacity(found.len());
        for (_, vector, _) in &found {
            let x = devectorize(vector)?;
            basis.push(ComplexSparseMatrix::from_dense(&hermitian_part(&x)));
        }
        Ok(SteadyStateOutcome::Degenerate { basis })
    }
}

/// Larger of the Hermitian components (X+X†)/2 and (X−X†)/2i.
fn hermitian_part(x: &Array2<C64>) -> Array2<C64> {
    let xdag = x.t().mapv(|z| z.conj());
    let sym = (x + &xdag).mapv(|z| 0.5 * z);
    let asym = (x - &xdag).mapv(|z| z * C64::new(0.0, -0.5));
    let norm = |m: &Array2<C64>| m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if norm(&sym) >= norm(&asym) {
        sym
    } else {
        asym
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{Boundary, LatticeGraph};
    use crate::liouville::trace_distance;
    use crate::models::{build_dissipative_ising, build_driven_bose_hubbard};

    fn decaying_qubit() -> LindbladModel {
        let lattice = LatticeGraph::chain(1, Boundary::Open).unwrap();
        build_dissipative_ising(lattice, 0.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn evolve_decaying_qubit_reaches_down() {
        let model = decaying_qubit();
        let up = DensityMatrix::basis_state(2, 0);
        let (rho, residual) =
            steady_state_evolve(&model, &up, 1e-10, &EvolveOptions::default()).unwrap();
        assert!(residual < 1e-10);
        let down = DensityMatrix::basis_state(2, 1);
        assert!(trace_distance(&rho, &down) < 1e-8);
    }

    #[test]
    fn evolve_nonconvergence_cutoff() {
        let model = decaying_qubit();
        let up = DensityMatrix::basis_state(2, 0);
        let opts = EvolveOptions {
            t_max: 0.2,
            dt: Some(0.01),
            check_every: 5,
        };
        assert!(matches!(
            steady_state_evolve(&model, &up, 1e-14, &opts),
            Err(LiouvilleError::NonConvergence(_))
        ));
    }

    #[test]
    fn eigen_decaying_qubit() {
        let model = decaying_qubit();
        let out = steady_state_eigen(&model).unwrap();
        let rho = out.unique().unwrap();
        let down = DensityMatrix::basis_state(2, 1);
        assert!(trace_distance(rho, &down) < 1e-10);
        assert!(out.residual().unwrap() < 1e-10);
    }

    #[test]
    fn eigen_matches_evolve_driven_qubit() {
        // V=0 driven Ising qubit
        let lattice = LatticeGraph::chain(1, Boundary::Open).unwrap();
        let model = build_dissipative_ising(lattice, 1.2, 0.0, 1.0).unwrap();
        let up = DensityMatrix::basis_state(2, 0);
        let (evolved, _) =
            steady_state_evolve(&model, &up, 1e-11, &EvolveOptions::default()).unwrap();
        let eig = steady_state_eigen(&model).unwrap();
        assert!(trace_distance(&evolved, eig.unique().unwrap()) < 1e-8);
    }

    #[test]
    fn eigen_two_decoupled_qubits_unique() {
        let lattice = LatticeGraph::chain(2, Boundary::Open).unwrap();
        let model = build_dissipative_ising(lattice, 0.0, 0.0, 1.0).unwrap();
        let out = steady_state_eigen(&model).unwrap();
        let rho = out.unique().unwrap();
        let down = DensityMatrix::basis_state(4, 3); // |down,down>
        assert!(trace_distance(rho, &down) < 1e-9);
    }

    #[test]
    fn eigen_detects_degenerate_manifold() {
        // γ=0: the Liouvillian null space is the commutant of H
        let lattice = LatticeGraph::chain(1, Boundary::Open).unwrap();
        let model = build_dissipative_ising(lattice, 1.0, 0.0, 0.0).unwrap();
        match steady_state_eigen(&model).unwrap() {
            SteadyStateOutcome::Degenerate { basis } => assert!(basis.len() >= 2),
            SteadyStateOutcome::Unique { .. } => panic!("expected degenerate manifold"),
        }
    }

    #[test]
    fn ldagl_decaying_qubit() {
        let model = decaying_qubit();
        let out = steady_state_ldagl(&model).unwrap();
        let rho = out.unique().unwrap();
        let down = DensityMatrix::basis_state(2, 1);
        assert!(trace_distance(rho, &down) < 1e-8);
    }

    #[test]
    fn ldagl_matches_eigen_two_site_models() {
        let lattice = LatticeGraph::chain(2, Boundary::Open).unwrap();
        for model in [
            build_dissipative_ising(lattice.clone(), 0.9, 2.3, 1.0).unwrap(),
            build_driven_bose_hubbard(lattice, 0.7, 1.5, 0.4, 0.6, 1.0, 2).unwrap(),
        ] {
            let a = steady_state_eigen(&model).unwrap();
            let b = steady_state_ldagl(&model).unwrap();
            let d = trace_distance(a.unique().unwrap(), b.unique().unwrap());
            assert!(d < 1e-8, "trace distance {d}");
        }
    }

    #[test]
    fn ldagl_ritz_values_nonnegative() {
        let model = decaying_qubit();
        let sup = build_superoperator(&model);
        let ldag = sup.matrix.dagger();
        let apply = |x: &[C64]| ldag.matvec(&sup.matrix.matvec(x));
        let pair = eigen::lanczos_smallest(&apply, sup.dim(), 4, 10, 1e-13, &[]).unwrap();
        assert!(pair.value.re >= -1e-12 * sup.matrix.inf_norm().powi(2));
    }
}
