//! Sparse storage and direct solvers for banded systems.
//!
//! The discretized operators this crate works with are sparse with small
//! bandwidth (a five-point stencil on a `g x g` grid has bandwidth `g`), and
//! every implicit time step, transfer-function evaluation, and rational-Krylov
//! solve reduces to factoring `a*E + b*A` once and back-substituting many
//! times. [`CsrMatrix`] is the assembly/storage format; [`banded`] provides
//! the LU factorization used for the actual solves.

pub mod banded;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with `f64` entries.
///
/// Invariants maintained by every constructor:
/// - `indptr` has length `nrows + 1`, is non-decreasing, and brackets
///   `indices`/`values`;
/// - column indices are strictly increasing within each row and in bounds;
/// - all values are finite.
///
/// Explicitly stored zeros are allowed and preserved: affine combinations of
/// operators must keep the union sparsity pattern regardless of the scalar
/// weights, so pattern and numerics are deliberately decoupled.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate entries
    /// are summed; explicit zeros are kept.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::invalid(format!(
                    "triplet index ({i}, {j}) outside {nrows} x {ncols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite value {v} at ({i}, {j})"
                )));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|&(i, j, _)| (i, j));

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        indptr.push(0);
        let mut row = 0usize;
        for (i, j, v) in sorted {
            while row < i {
                indptr.push(indices.len());
                row += 1;
            }
            if indices.len() > indptr[row] && *indices.last().unwrap() == j {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
            }
        }
        while row < nrows {
            indptr.push(indices.len());
            row += 1;
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    /// `alpha * I` of order `n`.
    pub fn scaled_identity(n: usize, alpha: f64) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![alpha; n],
        }
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        CsrMatrix {
            nrows: diag.len(),
            ncols: diag.len(),
            indptr: (0..=diag.len()).collect(),
            indices: (0..diag.len()).collect(),
            values: diag.to_vec(),
        }
    }

    /// Converts a dense matrix, keeping only entries that are exactly
    /// nonzero.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    triplets.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &triplets)
            .expect("dense conversion cannot produce invalid triplets")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    /// Entry `(i, j)`, zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        let mut y = DVector::zeros(self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// `y = A^T x`.
    pub fn matvec_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.nrows, "matvec_transpose dimension mismatch");
        let mut y = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * x[i];
            }
        }
        y
    }

    /// `A X` for a dense block of vectors.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols, "mul_dense dimension mismatch");
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for c in 0..x.ncols() {
                    y[(i, c)] += v * x[(j, c)];
                }
            }
        }
        y
    }

    /// `A^T X` for a dense block of vectors.
    pub fn tr_mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.nrows, "tr_mul_dense dimension mismatch");
        let mut y = DMatrix::zeros(self.ncols, x.ncols());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for c in 0..x.ncols() {
                    y[(j, c)] += v * x[(i, c)];
                }
            }
        }
        y
    }

    /// Linear combination `sum_k coeff_k * term_k` over the union sparsity
    /// pattern. All terms must share the same shape.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Result<CsrMatrix> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::invalid("linear combination of zero terms"))?;
        let (nrows, ncols) = (first.nrows, first.ncols);
        for &(c, m) in terms {
            if (m.nrows, m.ncols) != (nrows, ncols) {
                return Err(Error::dim(
                    "sparse linear combination",
                    format!("{nrows} x {ncols}"),
                    format!("{} x {}", m.nrows, m.ncols),
                ));
            }
            if !c.is_finite() {
                return Err(Error::invalid(format!("non-finite coefficient {c}")));
            }
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        // k-way merge of the sorted row patterns, one row at a time.
        let mut cursors = vec![0usize; terms.len()];
        for i in 0..nrows {
            for (cur, (_, m)) in cursors.iter_mut().zip(terms) {
                *cur = m.indptr[i];
            }
            loop {
                let mut next_col = usize::MAX;
                for (cur, (_, m)) in cursors.iter().zip(terms) {
                    if *cur < m.indptr[i + 1] {
                        next_col = next_col.min(m.indices[*cur]);
                    }
                }
                if next_col == usize::MAX {
                    break;
                }
                let mut acc = 0.0;
                for (cur, (c, m)) in cursors.iter_mut().zip(terms) {
                    if *cur < m.indptr[i + 1] && m.indices[*cur] == next_col {
                        acc += c * m.values[*cur];
                        *cur += 1;
                    }
                }
                indices.push(next_col);
                values.push(acc);
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    /// `self + scale * other` over the union pattern.
    pub fn add_scaled(&self, scale: f64, other: &CsrMatrix) -> Result<CsrMatrix> {
        CsrMatrix::linear_combination(&[(1.0, self), (scale, other)])
    }

    /// Multiplies every entry by `alpha`.
    pub fn scale(&self, alpha: f64) -> CsrMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols];
        for &j in &self.indices {
            counts[j] += 1;
        }
        let mut indptr = vec![0usize; self.ncols + 1];
        for j in 0..self.ncols {
            indptr[j + 1] = indptr[j] + counts[j];
        }
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = indptr.clone();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let pos = next[j];
                indices[pos] = i;
                values[pos] = v;
                next[j] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Checks `|A - A^T|_max <= tol * max(|A|_max, 1)`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        let scale = self.max_abs().max(1.0);
        let diff = match self.add_scaled(-1.0, &t) {
            Ok(d) => d,
            Err(_) => return false,
        };
        diff.max_abs() <= tol * scale
    }

    /// Lower and upper bandwidths `(kl, ku)`: the largest `i - j` and `j - i`
    /// over stored entries.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for i in 0..self.nrows {
            let (cols, _) = self.row(i);
            if let Some(&jmin) = cols.first() {
                kl = kl.max(i.saturating_sub(jmin));
            }
            if let Some(&jmax) = cols.last() {
                ku = ku.max(jmax.saturating_sub(i));
            }
        }
        (kl, ku)
    }

    /// Block-diagonal concatenation of square or rectangular blocks.
    pub fn block_diag(blocks: &[&CsrMatrix]) -> CsrMatrix {
        let nrows: usize = blocks.iter().map(|b| b.nrows).sum();
        let ncols: usize = blocks.iter().map(|b| b.ncols).sum();
        let nnz: usize = blocks.iter().map(|b| b.nnz()).sum();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        let mut col_off = 0usize;
        for b in blocks {
            for i in 0..b.nrows {
                let (cols, vals) = b.row(i);
                indices.extend(cols.iter().map(|&j| j + col_off));
                values.extend_from_slice(vals);
                indptr.push(indices.len());
            }
            col_off += b.ncols;
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Iterates over all stored entries as `(row, col, value)`.
    pub fn triplet_iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .map(move |(&j, &v)| (i, j, v))
                .collect::<Vec<_>>()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> CsrMatrix {
        // [[2, 0, 1], [0, 0, 0], [3, 4, 0]]
        CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (0, 2, 1.0), (2, 0, 3.0), (2, 1, 4.0)])
            .unwrap()
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = CsrMatrix::from_triplets(2, 2, &[(1, 1, 1.0), (0, 0, 2.0), (1, 1, 0.5)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 1), 1.5);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn explicit_zeros_are_kept() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 0.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn rejects_out_of_range_and_non_finite() {
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
        assert!(CsrMatrix::from_triplets(2, 2, &[(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn matvec_matches_dense() {
        let m = sample();
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let y = m.matvec(&x);
        let yd = m.to_dense() * &x;
        assert_relative_eq!(y, yd, epsilon = 1e-15);
        let z = m.matvec_transpose(&x);
        let zd = m.to_dense().transpose() * &x;
        assert_relative_eq!(z, zd, epsilon = 1e-15);
    }

    #[test]
    fn dense_block_products_match() {
        let m = sample();
        let x = DMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 - 1.5);
        assert_relative_eq!(m.mul_dense(&x), m.to_dense() * &x, epsilon = 1e-15);
        assert_relative_eq!(
            m.tr_mul_dense(&x),
            m.to_dense().transpose() * &x,
            epsilon = 1e-15
        );
    }

    #[test]
    fn linear_combination_has_union_pattern() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0)]).unwrap();
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 1, 3.0), (1, 1, -1.0)]).unwrap();
        let c = a.add_scaled(2.0, &b).unwrap();
        assert_eq!(c.nnz(), 3);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(0, 1), 6.0);
        assert_eq!(c.get(1, 1), 0.0);
        // the cancelled entry stays in the pattern
        let (cols, _) = c.row(1);
        assert_eq!(cols, &[1]);
    }

    #[test]
    fn transpose_round_trip() {
        let m = sample();
        let tt = m.transpose().transpose();
        assert_eq!(m, tt);
    }

    #[test]
    fn symmetry_check() {
        let s = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0), (0, 0, -2.0)]).unwrap();
        assert!(s.is_symmetric(1e-14));
        assert!(!sample().is_symmetric(1e-14));
    }

    #[test]
    fn bandwidths_of_tridiagonal() {
        let t = CsrMatrix::from_triplets(
            4,
            4,
            &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (3, 2, 1.0), (3, 3, 1.0)],
        )
        .unwrap();
        assert_eq!(t.bandwidths(), (1, 1));
        assert_eq!(CsrMatrix::identity(3).bandwidths(), (0, 0));
    }

    #[test]
    fn block_diag_layout() {
        let a = CsrMatrix::identity(2);
        let b = CsrMatrix::from_triplets(1, 1, &[(0, 0, 5.0)]).unwrap();
        let c = CsrMatrix::block_diag(&[&a, &b]);
        assert_eq!(c.nrows(), 3);
        assert_eq!(c.get(2, 2), 5.0);
        assert_eq!(c.get(2, 0), 0.0);
        assert_eq!(c.get(0, 0), 1.0);
    }
}
