//! Dense eigendecomposition/factorization facade and Krylov iterations.
//!
//! Dense routines delegate to LAPACK through `ndarray-linalg`. The iterative
//! solvers (shift-invert Arnoldi for non-Hermitian operators, Lanczos with
//! full reorthogonalization for Hermitian positive-semidefinite ones) are used
//! by the steady-state module where full diagonalization is too expensive.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, Factorize, LUFactorized, Solve, UPLO};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::sparse::ComplexSparseMatrix;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("dense linear algebra failed: {0}")]
    Lapack(String),
    #[error("Krylov iteration failed to converge: {0}")]
    NonConvergence(String),
}

/// Eigendecomposition of a Hermitian matrix (ascending eigenvalues).
pub fn eigh(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>), EigenError> {
    a.eigh(UPLO::Lower)
        .map_err(|e| EigenError::Lapack(e.to_string()))
}

/// Eigenvalues of a Hermitian matrix (ascending).
pub fn eigvalsh(a: &Array2<C64>) -> Result<Array1<f64>, EigenError> {
    Ok(eigh(a)?.0)
}

/// Full eigendecomposition of a general complex matrix.
/// Eigenvectors are the columns of the returned matrix.
pub fn eig_general(a: &Array2<C64>) -> Result<(Array1<C64>, Array2<C64>), EigenError> {
    a.eig().map_err(|e| EigenError::Lapack(e.to_string()))
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn hermitian_trace_norm(a: &Array2<C64>) -> Result<f64, EigenError> {
    Ok(eigvalsh(a)?.iter().map(|w| w.abs()).sum())
}

/// LU factorization wrapper for repeated solves against the same matrix.
pub struct LuSolver {
    fact: LUFactorized<ndarray::OwnedRepr<C64>>,
}

impl LuSolver {
    pub fn new(a: Array2<C64>) -> Result<Self, EigenError> {
        let fact = a
            .factorize()
            .map_err(|e| EigenError::Lapack(e.to_string()))?;
        Ok(Self { fact })
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>, EigenError> {
        let rhs = Array1::from_vec(b.to_vec());
        let x = self
            .fact
            .solve(&rhs)
            .map_err(|e| EigenError::Lapack(e.to_string()))?;
        Ok(x.to_vec())
    }
}

pub(crate) fn cdot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub(crate) fn vnorm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * *xi;
    }
}

pub(crate) fn scale_vec(alpha: f64, x: &mut [C64]) {
    for v in x.iter_mut() {
        *v *= alpha;
    }
}

/// One approximate eigenpair from a Krylov iteration.
#[derive(Debug, Clone)]
pub struct RitzPair {
    pub value: C64,
    pub vector: Vec<C64>,
    /// ‖A x − λ x‖₂ with ‖x‖ = 1, measured against the original operator.
    pub residual: f64,
}

/// Eigenpairs of `op` closest to `shift`, via shift-invert Arnoldi.
///
/// The shifted matrix is densified and LU-factorized once; the Arnoldi
/// iteration then runs on the solve operator. Returns up to `n_pairs` pairs
/// sorted by |λ − shift| ascending.
pub fn shift_invert_arnoldi(
    op: &ComplexSparseMatrix,
    shift: C64,
    n_pairs: usize,
    subspace: usize,
    deflate: &[Vec<C64>],
) -> Result<Vec<RitzPair>, EigenError> {
    let n = op.rows();
    let mut shifted = op.to_dense();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let lu = LuSolver::new(shifted)?;
    let m = subspace.min(n).max(n_pairs + 2).min(n);

    // Deterministic, dense start vector.
    let mut rng = ChaCha12Rng::seed_from_u64(0x0a9e_11d5);
    let mut q0: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    project_out(&mut q0, deflate);
    let nrm = vnorm(&q0);
    if nrm < 1e-300 {
        return Err(EigenError::NonConvergence(
            "deflation space exhausts the full space".into(),
        ));
    }
    scale_vec(1.0 / nrm, &mut q0);

    let mut basis: Vec<Vec<C64>> = vec![q0];
    let mut hess = Array2::<C64>::zeros((m + 1, m));
    let mut dim = 0;
    for j in 0..m {
        let mut w = lu.solve(&basis[j])?;
        project_out(&mut w, deflate);
        // modified Gram-Schmidt with one reorthogonalization pass
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let h = cdot(q, &w);
                hess[(i, j)] += h;
                axpy(-h, q, &mut w);
            }
        }
        let beta = vnorm(&w);
        dim = j + 1;
        if beta < 1e-13 {
            break; // invariant subspace found
        }
        hess[(j + 1, j)] = C64::new(beta, 0.0);
        scale_vec(1.0 / beta, &mut w);
        basis.push(w);
    }

    let hm = hess.slice(ndarray::s![..dim, ..dim]).to_owned();
    let (thetas, vecs) = eig_general(&hm)?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        thetas[b]
            .norm()
            .partial_cmp(&thetas[a].norm())
            .expect("finite Ritz values")
    });

    let mut out = Vec::new();
    for &k in order.iter().take(n_pairs) {
        let theta = thetas[k];
        if theta.norm() < 1e-300 {
            continue;
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (i, q) in basis.iter().take(dim).enumerate() {
            axpy(vecs[(i, k)], q, &mut x);
        }
        let nrm = vnorm(&x);
        if nrm < 1e-300 {
            continue;
        }
        scale_vec(1.0 / nrm, &mut x);
        let lambda = shift + C64::new(1.0, 0.0) / theta;
        let ax = op.matvec(&x);
        let mut res = 0.0f64;
        for i in 0..n {
            res += (ax[i] - lambda * x[i]).norm_sqr();
        }
        out.push(RitzPair {
            value: lambda,
            vector: x,
            residual: res.sqrt(),
        });
    }
    if out.is_empty() {
        return Err(EigenError::NonConvergence(
            "shift-invert Arnoldi produced no Ritz pairs".into(),
        ));
    }
    Ok(out)
}

/// Smallest eigenpair of a Hermitian PSD operator given as a matvec closure.
///
/// Lanczos with full reorthogonalization and restarts; vectors in `deflate`
/// are projected out of the iteration so successive null vectors can be
/// extracted one by one.
pub fn lanczos_smallest(
    apply: &dyn Fn(&[C64]) -> Vec<C64>,
    n: usize,
    subspace: usize,
    max_restarts: usize,
    target_residual: f64,
    deflate: &[Vec<C64>],
) -> Result<RitzPair, EigenError> {
    let m = subspace.min(n).max(2);
    let mut rng = ChaCha12Rng::seed_from_u64(0x1a2c_705e);
    let mut v: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    project_out(&mut v, deflate);
    let nrm = vnorm(&v);
    if nrm < 1e-300 {
        return Err(EigenError::NonConvergence(
            "deflation space exhausts the full space".into(),
        ));
    }
    scale_vec(1.0 / nrm, &mut v);

    let mut best: Option<RitzPair> = None;
    for _restart in 0..max_restarts {
        let mut basis: Vec<Vec<C64>> = vec![v.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut dim = 0;
        for j in 0..m {
            let mut w = apply(&basis[j]);
            project_out(&mut w, deflate);
            let alpha = cdot(&basis[j], &w).re;
            alphas.push(alpha);
            // full reorthogonalization (two passes)
            for _ in 0..2 {
                for q in basis.iter() {
                    let h = cdot(q, &w);
                    axpy(-h, q, &mut w);
                }
            }
            let beta = vnorm(&w);
            dim = j + 1;
            if beta < 1e-13 {
                break;
            }
            betas.push(beta);
            scale_vec(1.0 / beta, &mut w);
            basis.push(w);
        }

        // Tridiagonal Ritz problem (real symmetric, solved as Hermitian).
        let mut tri = Array2::<C64>::zeros((dim, dim));
        for i in 0..dim {
            tri[(i, i)] = C64::new(alphas[i], 0.0);
            if i + 1 < dim {
                tri[(i, i + 1)] = C64::new(betas[i], 0.0);
                tri[(i + 1, i)] = C64::new(betas[i], 0.0);
            }
        }
        let (_ritz, s) = eigh(&tri)?;
        let k = 0; // ascending order: smallest first
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (i, q) in basis.iter().take(dim).enumerate() {
            axpy(s[(i, k)], q, &mut x);
        }
        project_out(&mut x, deflate);
        let nrm = vnorm(&x);
        scale_vec(1.0 / nrm, &mut x);
        let ax = apply(&x);
        let lambda = cdot(&x, &ax).re;
        let mut res = 0.0f64;
        for i in 0..n {
            res += (ax[i] - C64::new(lambda, 0.0) * x[i]).norm_sqr();
        }
        let res = res.sqrt();
        let improved = best
            .as_ref()
            .map(|b| res < b.residual)
            .unwrap_or(true);
        if improved {
            best = Some(RitzPair {
                value: C64::new(lambda, 0.0),
                vector: x.clone(),
                residual: res,
            });
        }
        if res <= target_residual {
            break;
        }
        v = x;
    }
    best.ok_or_else(|| EigenError::NonConvergence("Lanczos produced no Ritz pair".into()))
}

fn project_out(v: &mut [C64], basis: &[Vec<C64>]) {
    for b in basis {
        let h = cdot(b, v);
        axpy(-h, b, v);
    }
}
