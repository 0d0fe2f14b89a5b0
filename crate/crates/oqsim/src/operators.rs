//! Local operators and their embedding into composite spaces.
//!
//! Basis conventions: qubit basis order is (up, down) = (index 0, index 1),
//! so σz = diag(+1, −1) and σ− = |down⟩⟨up| flips up → down. Bosonic
//! operators act on a Fock space truncated at occupation `n_max`.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::hilbert::HilbertSpace;
use crate::sparse::{ComplexSparseMatrix, OperatorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliKind {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

/// Standard 2x2 Pauli matrices; σ± = (σx ± iσy)/2.
pub fn pauli(kind: PauliKind) -> ComplexSparseMatrix {
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let triplets = match kind {
        PauliKind::X => vec![(0, 1, one), (1, 0, one)],
        PauliKind::Y => vec![(0, 1, -i), (1, 0, i)],
        PauliKind::Z => vec![(0, 0, one), (1, 1, -one)],
        PauliKind::Plus => vec![(0, 1, one)],
        PauliKind::Minus => vec![(1, 0, one)],
    };
    ComplexSparseMatrix::from_triplets(2, 2, triplets).expect("pauli indices valid")
}

/// Truncated bosonic ladder operators on a Fock space of dimension n_max + 1.
///
/// Returns (annihilate, create, number) with a|n⟩ = √n |n−1⟩ and
/// number = create · annihilate.
pub fn boson_ops(
    n_max: usize,
) -> Result<(ComplexSparseMatrix, ComplexSparseMatrix, ComplexSparseMatrix), OperatorError> {
    if n_max < 1 {
        return Err(OperatorError::InvalidTruncation(n_max));
    }
    let dim = n_max + 1;
    let annihilate = ComplexSparseMatrix::from_triplets(
        dim,
        dim,
        (1..dim).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))),
    )?;
    let create = annihilate.dagger();
    let number = create.matmul(&annihilate)?;
    Ok((annihilate, create, number))
}

/// Embed a single-site operator as I ⊗ … ⊗ op ⊗ … ⊗ I (site 0 leftmost).
pub fn embed(
    op: &ComplexSparseMatrix,
    site: usize,
    space: &HilbertSpace,
) -> Result<ComplexSparseMatrix, OperatorError> {
    if site >= space.n_sites() {
        return Err(OperatorError::SiteOutOfRange {
            site,
            n_sites: space.n_sites(),
        });
    }
    let d = space.site_dim(site);
    if op.rows() != d || op.cols() != d {
        return Err(OperatorError::SiteDimMismatch {
            site,
            op_dim: op.rows(),
            site_dim: d,
        });
    }
    let left = space.dim_left_of(site);
    let right = space.dim_right_of(site);
    let total = space.total_dim();
    let mut triplets = Vec::with_capacity(op.nnz() * left * right);
    for (r, c, v) in op.entries() {
        for l in 0..left {
            let row_base = (l * d + r) * right;
            let col_base = (l * d + c) * right;
            for k in 0..right {
                triplets.push((row_base + k, col_base + k, v));
            }
        }
    }
    ComplexSparseMatrix::from_triplets(total, total, triplets)
}

/// Embed a two-site operator product op_a^(site_a) · op_b^(site_b).
///
/// Operand order is irrelevant since the supports are disjoint.
pub fn embed_pair(
    op_a: &ComplexSparseMatrix,
    site_a: usize,
    op_b: &ComplexSparseMatrix,
    site_b: usize,
    space: &HilbertSpace,
) -> Result<ComplexSparseMatrix, OperatorError> {
    if site_a == site_b {
        return Err(OperatorError::EqualSites(site_a));
    }
    let a = embed(op_a, site_a, space)?;
    let b = embed(op_b, site_b, space)?;
    a.matmul(&b)
}

/// ⟨ψ|O|ψ⟩ for a pure state vector.
pub fn expectation_pure(op: &ComplexSparseMatrix, psi: &[C64]) -> Result<C64, OperatorError> {
    if op.cols() != psi.len() || !op.is_square() {
        return Err(OperatorError::DimensionMismatch {
            context: "expectation_pure",
            lhs_rows: op.rows(),
            lhs_cols: op.cols(),
            rhs_rows: psi.len(),
            rhs_cols: 1,
        });
    }
    let opsi = op.matvec(psi);
    Ok(psi
        .iter()
        .zip(opsi.iter())
        .map(|(a, b)| a.conj() * b)
        .sum())
}

/// tr(O ρ) for a density matrix in sparse form.
pub fn expectation_dm(
    op: &ComplexSparseMatrix,
    rho: &ComplexSparseMatrix,
) -> Result<C64, OperatorError> {
    if op.cols() != rho.rows() || op.rows() != rho.cols() {
        return Err(OperatorError::DimensionMismatch {
            context: "expectation_dm",
            lhs_rows: op.rows(),
            lhs_cols: op.cols(),
            rhs_rows: rho.rows(),
            rhs_cols: rho.cols(),
        });
    }
    let mut s = C64::new(0.0, 0.0);
    for (r, c, v) in op.entries() {
        s += v * rho.get(c, r);
    }
    Ok(s)
}

/// tr(O ρ) for a dense density matrix.
pub fn expectation_dense(op: &ComplexSparseMatrix, rho: &Array2<C64>) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (r, c, v) in op.entries() {
        s += v * rho[(c, r)];
    }
    s
}

/// Partial trace over all sites except `keep` (given in ascending order).
pub fn partial_trace_dense(
    rho: &Array2<C64>,
    space: &HilbertSpace,
    keep: &[usize],
) -> Array2<C64> {
    debug_assert!(keep.windows(2).all(|w| w[0] < w[1]));
    let kept_dim: usize = keep.iter().map(|&s| space.site_dim(s)).product();
    let n_sites = space.n_sites();
    let traced: Vec<usize> = (0..n_sites).filter(|s| !keep.contains(s)).collect();
    let env_dim: usize = traced.iter().map(|&s| space.site_dim(s)).product();

    let mut out = Array2::zeros((kept_dim, kept_dim));
    let mut locals_row = vec![0usize; n_sites];
    let mut locals_col = vec![0usize; n_sites];
    for a in 0..kept_dim {
        let akept = decode_mixed(a, space, keep);
        for b in 0..kept_dim {
            let bkept = decode_mixed(b, space, keep);
            let mut s = C64::new(0.0, 0.0);
            for e in 0..env_dim {
                let env = decode_mixed(e, space, &traced);
                for (pos, &site) in keep.iter().enumerate() {
                    locals_row[site] = akept[pos];
                    locals_col[site] = bkept[pos];
                }
                for (pos, &site) in traced.iter().enumerate() {
                    locals_row[site] = env[pos];
                    locals_col[site] = env[pos];
                }
                s += rho[(space.encode_index(&locals_row), space.encode_index(&locals_col))];
            }
            out[(a, b)] = s;
        }
    }
    out
}

fn decode_mixed(mut index: usize, space: &HilbertSpace, sites: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; sites.len()];
    for (pos, &site) in sites.iter().enumerate().rev() {
        let d = space.site_dim(site);
        out[pos] = index % d;
        index /= d;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pauli_definitions() {
        let x = pauli(PauliKind::X);
        assert_eq!(x.get(0, 1), c(1.0, 0.0));
        assert_eq!(x.get(1, 0), c(1.0, 0.0));
        let minus = pauli(PauliKind::Minus);
        assert_eq!(minus.get(1, 0), c(1.0, 0.0));
        assert_eq!(minus.nnz(), 1);
        // σ± = (σx ± iσy)/2
        let y = pauli(PauliKind::Y);
        let reconstructed = x
            .add(&y.scale(c(0.0, -1.0)))
            .unwrap()
            .scale(c(0.5, 0.0));
        assert_eq!(reconstructed, minus);
    }

    #[test]
    fn pauli_z_involution() {
        let z = pauli(PauliKind::Z);
        assert_eq!(z.matmul(&z).unwrap(), ComplexSparseMatrix::identity(2));
    }

    #[test]
    fn boson_ladder_entries() {
        let (a, adag, n) = boson_ops(2).unwrap();
        assert!((a.get(0, 1) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((a.get(1, 2) - c(2.0f64.sqrt(), 0.0)).norm() < 1e-15);
        assert_eq!(adag, a.dagger());
        for (k, expect) in [0.0, 1.0, 2.0].into_iter().enumerate() {
            assert!((n.get(k, k) - c(expect, 0.0)).norm() < 1e-14);
        }
        assert!(boson_ops(0).is_err());
    }

    #[test]
    fn embed_sigma_z_first_site() {
        let space = HilbertSpace::qubits(2).unwrap();
        let z = embed(&pauli(PauliKind::Z), 0, &space).unwrap();
        for (k, expect) in [1.0, 1.0, -1.0, -1.0].into_iter().enumerate() {
            assert_eq!(z.get(k, k), c(expect, 0.0));
        }
    }

    #[test]
    fn embed_identity_is_identity() {
        let space = HilbertSpace::new(vec![2, 3]).unwrap();
        let id3 = ComplexSparseMatrix::identity(3);
        assert_eq!(
            embed(&id3, 1, &space).unwrap(),
            ComplexSparseMatrix::identity(6)
        );
    }

    #[test]
    fn embed_errors() {
        let space = HilbertSpace::qubits(2).unwrap();
        let id3 = ComplexSparseMatrix::identity(3);
        assert!(matches!(
            embed(&id3, 0, &space),
            Err(OperatorError::SiteDimMismatch { .. })
        ));
        assert!(matches!(
            embed(&pauli(PauliKind::X), 2, &space),
            Err(OperatorError::SiteOutOfRange { .. })
        ));
    }

    #[test]
    fn embed_pair_zz() {
        let space = HilbertSpace::qubits(2).unwrap();
        let z = pauli(PauliKind::Z);
        let zz = embed_pair(&z, 0, &z, 1, &space).unwrap();
        for (k, expect) in [1.0, -1.0, -1.0, 1.0].into_iter().enumerate() {
            assert_eq!(zz.get(k, k), c(expect, 0.0));
        }
        // operand order commutes for disjoint supports
        assert_eq!(zz, embed_pair(&z, 1, &z, 0, &space).unwrap());
        assert!(matches!(
            embed_pair(&z, 1, &z, 1, &space),
            Err(OperatorError::EqualSites(1))
        ));
    }

    #[test]
    fn embed_product_matches_kron() {
        let space = HilbertSpace::qubits(2).unwrap();
        let x = pauli(PauliKind::X);
        let xx = embed(&x, 1, &space)
            .unwrap()
            .matmul(&embed(&x, 0, &space).unwrap())
            .unwrap();
        assert_eq!(xx, x.kron(&x));
    }

    #[test]
    fn embed_preserves_sparsity() {
        let space = HilbertSpace::new(vec![2, 3, 2]).unwrap();
        let x = pauli(PauliKind::X);
        let e = embed(&x, 0, &space).unwrap();
        assert!(e.nnz() <= x.nnz() * (space.total_dim() / 2));
    }

    #[test]
    fn expectation_basics() {
        let z = pauli(PauliKind::Z);
        let up = [c(1.0, 0.0), c(0.0, 0.0)];
        assert!((expectation_pure(&z, &up).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        let mixed = ComplexSparseMatrix::identity(2).scale(c(0.5, 0.0));
        assert!(expectation_dm(&z, &mixed).unwrap().norm() < 1e-15);
    }

    #[test]
    fn partial_trace_product_state() {
        let space = HilbertSpace::qubits(2).unwrap();
        // |up><up| ⊗ I/2
        let rho_a = ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let rho_b = ndarray::array![[c(0.5, 0.0), c(0.1, 0.2)], [c(0.1, -0.2), c(0.5, 0.0)]];
        let mut full = Array2::zeros((4, 4));
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        full[(i * 2 + k, j * 2 + l)] = rho_a[(i, j)] * rho_b[(k, l)];
                    }
                }
            }
        }
        let red_b = partial_trace_dense(&full, &space, &[1]);
        for i in 0..2 {
            for j in 0..2 {
                assert!((red_b[(i, j)] - rho_b[(i, j)]).norm() < 1e-14);
            }
        }
        let red_a = partial_trace_dense(&full, &space, &[0]);
        assert!((red_a[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(red_a[(1, 1)].norm() < 1e-14);
    }
}
