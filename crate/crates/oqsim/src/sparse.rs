//! Sparse complex matrices in compressed-row form.
//!
//! Every operator in the toolkit (Hamiltonians, jump operators, vectorized
//! Liouvillians) is carried by [`ComplexSparseMatrix`]. Entries are kept in a
//! canonical form: row-major ordering, strictly increasing column indices
//! within each row, duplicates summed, and entries with |value| <= 1e-15
//! pruned after every arithmetic operation. Canonicalization makes equality
//! tests and oracle comparisons reproducible.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Magnitudes at or below this threshold are dropped after arithmetic.
pub const PRUNE_EPS: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("dimension mismatch: {context} ({lhs_rows}x{lhs_cols} vs {rhs_rows}x{rhs_cols})")]
    DimensionMismatch {
        context: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },
    #[error("entry index ({row}, {col}) out of bounds for {rows}x{cols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("site index {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("operator dimension {op_dim} does not match site dimension {site_dim} of site {site}")]
    SiteDimMismatch {
        site: usize,
        op_dim: usize,
        site_dim: usize,
    },
    #[error("embed_pair requires two distinct sites, got {0}")]
    EqualSites(usize),
    #[error("invalid Hilbert space: {0}")]
    InvalidSpace(String),
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("boson truncation n_max must be >= 1, got {0}")]
    InvalidTruncation(usize),
    #[error("vector length {0} is not a perfect square")]
    NotSquareLength(usize),
}

/// Sparse complex matrix (CSR layout, canonical ordering).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl ComplexSparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    /// Build from (row, col, value) triplets; duplicates are summed and tiny
    /// entries pruned.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Result<Self, OperatorError> {
        let mut entries: Vec<(usize, usize, C64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(OperatorError::IndexOutOfBounds {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
            entries.push((r, c, v));
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut iter = entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v.norm() > PRUNE_EPS {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(a: &Array2<C64>) -> Self {
        let (rows, cols) = a.dim();
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = a[(r, c)];
                if v.norm() > PRUNE_EPS {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut a = Array2::zeros((self.rows, self.cols));
        for (r, c, v) in self.entries() {
            a[(r, c)] = v;
        }
        a
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterate entries in canonical (row-major) order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> (&[usize], &[C64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).1.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Result<Self, OperatorError> {
        self.check_same_shape(other, "add")?;
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        triplets.extend(self.entries());
        triplets.extend(other.entries());
        Self::from_triplets(self.rows, self.cols, triplets)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, OperatorError> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: C64) -> Self {
        if factor.norm() == 0.0 {
            return Self::zeros(self.rows, self.cols);
        }
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        out.prune();
        out
    }

    /// Sparse-sparse product (Gustavson row merge).
    pub fn matmul(&self, other: &Self) -> Result<Self, OperatorError> {
        if self.cols != other.rows {
            return Err(OperatorError::DimensionMismatch {
                context: "matmul",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: other.rows,
                rhs_cols: other.cols,
            });
        }
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![C64::new(0.0, 0.0); other.cols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.rows {
            let (acols, avals) = self.row(r);
            for (&k, &av) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&c, &bv) in bcols.iter().zip(bvals) {
                    if acc[c] == C64::new(0.0, 0.0) {
                        touched.push(c);
                    }
                    acc[c] += av * bv;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                let v = acc[c];
                acc[c] = C64::new(0.0, 0.0);
                if v.norm() > PRUNE_EPS {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            touched.clear();
            row_ptr[r + 1] = col_idx.len();
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<_> = self.entries().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.cols, self.rows, triplets).expect("transpose indices valid")
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.conj();
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let triplets: Vec<_> = self.entries().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.cols, self.rows, triplets).expect("dagger indices valid")
    }

    /// Kronecker product, self ⊗ other.
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut triplets = Vec::with_capacity(self.nnz() * other.nnz());
        for (ra, ca, va) in self.entries() {
            for (rb, cb, vb) in other.entries() {
                triplets.push((ra * other.rows + rb, ca * other.cols + cb, va * vb));
            }
        }
        Self::from_triplets(rows, cols, triplets).expect("kron indices valid")
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "matvec length mismatch");
        let mut y = vec![C64::new(0.0, 0.0); self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(self.cols, x.len(), "matvec length mismatch");
        assert_eq!(self.rows, y.len(), "matvec output length mismatch");
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let mut s = C64::new(0.0, 0.0);
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c];
            }
            y[r] = s;
        }
    }

    /// Sparse * dense product.
    pub fn mul_dense(&self, b: &Array2<C64>) -> Array2<C64> {
        assert_eq!(self.cols, b.nrows(), "mul_dense shape mismatch");
        let n = b.ncols();
        let mut out = Array2::zeros((self.rows, n));
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&k, &v) in cols.iter().zip(vals) {
                let brow = b.row(k);
                let mut orow = out.row_mut(r);
                for j in 0..n {
                    orow[j] += v * brow[j];
                }
            }
        }
        out
    }

    /// Dense * sparse product (a * self).
    pub fn rmul_dense(&self, a: &Array2<C64>) -> Array2<C64> {
        assert_eq!(a.ncols(), self.rows, "rmul_dense shape mismatch");
        let m = a.nrows();
        let mut out = Array2::zeros((m, self.cols));
        for k in 0..self.rows {
            let (cols, vals) = self.row(k);
            if cols.is_empty() {
                continue;
            }
            let acol = a.column(k);
            for (&c, &v) in cols.iter().zip(vals) {
                let mut ocol = out.column_mut(c);
                for i in 0..m {
                    ocol[i] += acol[i] * v;
                }
            }
        }
        out
    }

    /// Max-norm of A - A†; zero for Hermitian matrices.
    pub fn hermitian_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for (r, c, v) in self.entries() {
            defect = defect.max((v - self.get(c, r).conj()).norm());
        }
        defect
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermitian_defect() <= tol
    }

    fn prune(&mut self) {
        if self.values.iter().all(|v| v.norm() > PRUNE_EPS) {
            return;
        }
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if v.norm() > PRUNE_EPS {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    fn check_same_shape(&self, other: &Self, context: &'static str) -> Result<(), OperatorError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(OperatorError::DimensionMismatch {
                context,
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: other.rows,
                rhs_cols: other.cols,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates_and_prune() {
        let m = ComplexSparseMatrix::from_triplets(
            2,
            2,
            vec![
                (0, 1, c(1.0, 0.0)),
                (0, 1, c(2.0, 0.0)),
                (1, 0, c(1e-16, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0, 0.0));
        assert_eq!(m.get(1, 0), c(0.0, 0.0));
    }

    #[test]
    fn out_of_bounds_rejected() {
        let err = ComplexSparseMatrix::from_triplets(2, 2, vec![(2, 0, c(1.0, 0.0))]);
        assert!(matches!(err, Err(OperatorError::IndexOutOfBounds { .. })));
    }

    #[test]
    fn matmul_matches_dense() {
        let a = ComplexSparseMatrix::from_triplets(
            2,
            3,
            vec![(0, 0, c(1.0, 1.0)), (0, 2, c(2.0, 0.0)), (1, 1, c(0.0, -1.0))],
        )
        .unwrap();
        let b = ComplexSparseMatrix::from_triplets(
            3,
            2,
            vec![(0, 1, c(1.0, 0.0)), (1, 0, c(3.0, 0.0)), (2, 1, c(0.0, 2.0))],
        )
        .unwrap();
        let ab = a.matmul(&b).unwrap();
        let dense = a.to_dense().dot(&b.to_dense());
        for r in 0..2 {
            for cidx in 0..2 {
                assert!((ab.get(r, cidx) - dense[(r, cidx)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn add_cancellation_prunes() {
        let a = ComplexSparseMatrix::from_triplets(1, 1, vec![(0, 0, c(1.0, 0.0))]).unwrap();
        let b = a.scale(c(-1.0, 0.0));
        let s = a.add(&b).unwrap();
        assert_eq!(s.nnz(), 0);
        assert_eq!(s, ComplexSparseMatrix::zeros(1, 1));
    }

    #[test]
    fn shape_mismatch_errors() {
        let a = ComplexSparseMatrix::zeros(2, 2);
        let b = ComplexSparseMatrix::zeros(3, 3);
        assert!(a.add(&b).is_err());
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn kron_identity_blocks() {
        let id = ComplexSparseMatrix::identity(2);
        let sx =
            ComplexSparseMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))])
                .unwrap();
        let k = id.kron(&sx);
        assert_eq!(k.rows(), 4);
        assert_eq!(k.get(0, 1), c(1.0, 0.0));
        assert_eq!(k.get(2, 3), c(1.0, 0.0));
        assert_eq!(k.get(0, 3), c(0.0, 0.0));
    }

    #[test]
    fn matvec_and_dense_products_agree() {
        let a = ComplexSparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 1, c(1.0, 2.0)), (1, 2, c(-1.0, 0.0)), (2, 0, c(0.5, 0.5))],
        )
        .unwrap();
        let x = vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0)];
        let y = a.matvec(&x);
        let xd = Array2::from_shape_fn((3, 1), |(i, _)| x[i]);
        let yd = a.mul_dense(&xd);
        for i in 0..3 {
            assert!((y[i] - yd[(i, 0)]).norm() < 1e-14);
        }
        let left = a.rmul_dense(&xd.t().to_owned());
        let ltd = xd.t().to_owned().dot(&a.to_dense());
        for j in 0..3 {
            assert!((left[(0, j)] - ltd[(0, j)]).norm() < 1e-14);
        }
    }

    fn arb_sparse(dim: usize) -> impl Strategy<Value = ComplexSparseMatrix> {
        proptest::collection::vec(
            (0..dim, 0..dim, -1.0f64..1.0, -1.0f64..1.0),
            0..dim * dim,
        )
        .prop_map(move |trip| {
            ComplexSparseMatrix::from_triplets(
                dim,
                dim,
                trip.into_iter().map(|(r, c_, re, im)| (r, c_, C64::new(re, im))),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn dagger_involution(a in arb_sparse(4)) {
            prop_assert_eq!(a.dagger().dagger(), a.clone());
        }

        // (AB)† = B†A†
        #[test]
        fn dagger_antihomomorphism(a in arb_sparse(4), b in arb_sparse(4)) {
            let lhs = a.matmul(&b).unwrap().dagger();
            let rhs = b.dagger().matmul(&a.dagger()).unwrap();
            let diff = lhs.sub(&rhs).unwrap();
            prop_assert!(diff.max_abs() <= 1e-14);
        }

        #[test]
        fn transpose_twice_is_identity(a in arb_sparse(5)) {
            prop_assert_eq!(a.transpose().transpose(), a.clone());
        }
    }
}
