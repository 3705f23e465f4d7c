//! Basis construction in weighted inner products.
//!
//! Reduction methods for diffusion-type problems measure vectors in an
//! energy inner product `<x, y> = x^T M y` with a symmetric positive
//! definite weight matrix, not in the Euclidean one. Every operation here is
//! parameterized by an [`InnerProduct`] so bases come out `M`-orthonormal;
//! passing [`InnerProduct::Identity`] recovers the familiar Euclidean
//! behavior.
//!
//! The module offers four operations:
//! - [`orthonormalize`]: two-pass modified Gram-Schmidt with column dropping,
//! - [`pod_modes`]: proper orthogonal decomposition by the method of
//!   snapshots,
//! - [`rank_truncate`]: Euclidean SVD truncation of a (near-)redundant basis,
//! - [`small_generalized_eig`]: dense generalized eigensolver for reduced
//!   pencils, giving both right and left eigenvectors.

pub mod backend;

pub use backend::GeneralizedEigen;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Order cap for dense eigenvalue computations. Reduced models live far
/// below this; anything larger indicates a full-order matrix leaked into a
/// dense code path.
pub const SMALL_PROBLEM_LIMIT: usize = 500;

/// How orthonormal results of [`orthonormalize`] and [`pod_modes`] are
/// required to be: `max |V^T M V - I|` stays below this. Two Gram-Schmidt
/// passes reach machine precision on anything reasonably conditioned, so the
/// margin here is generous.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// A symmetric positive definite weight defining `<x, y> = x^T M y`.
///
/// Symmetry is validated at construction; positive definiteness is assumed
/// and surfaces, if violated, as a zero or negative squared norm during
/// orthogonalization (the offending column is then treated as zero).
#[derive(Debug, Clone)]
pub enum InnerProduct {
    /// Euclidean inner product.
    Identity,
    /// Sparse weight matrix, the usual case for discretized energy products.
    Sparse(CsrMatrix),
    /// Dense weight matrix, typical after projection to a reduced space.
    Dense(DMatrix<f64>),
}

impl InnerProduct {
    /// Wraps a sparse weight after checking symmetry.
    pub fn sparse(m: CsrMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid("inner product matrix must be square"));
        }
        if !m.is_symmetric(1e-12) {
            return Err(Error::invalid("inner product matrix must be symmetric"));
        }
        Ok(InnerProduct::Sparse(m))
    }

    /// Wraps a dense weight after checking symmetry.
    pub fn dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid("inner product matrix must be square"));
        }
        let scale = m.amax().max(1.0);
        if (&m - m.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid("inner product matrix must be symmetric"));
        }
        Ok(InnerProduct::Dense(m))
    }

    /// Dimension of the underlying space, if the weight pins one down.
    pub fn dim(&self) -> Option<usize> {
        match self {
            InnerProduct::Identity => None,
            InnerProduct::Sparse(m) => Some(m.nrows()),
            InnerProduct::Dense(m) => Some(m.nrows()),
        }
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        match self.dim() {
            Some(d) if d != n => Err(Error::dim(
                "inner product application",
                format!("weight of dimension {d}"),
                format!("vectors of dimension {n}"),
            )),
            _ => Ok(()),
        }
    }

    /// `M x`.
    pub fn apply_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            InnerProduct::Identity => x.clone(),
            InnerProduct::Sparse(m) => m.matvec(x),
            InnerProduct::Dense(m) => m * x,
        }
    }

    /// `M X` column-wise.
    pub fn apply_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            InnerProduct::Identity => x.clone(),
            InnerProduct::Sparse(m) => m.mul_dense(x),
            InnerProduct::Dense(m) => m * x,
        }
    }

    /// `x^T M y`.
    pub fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match self {
            InnerProduct::Identity => x.dot(y),
            _ => x.dot(&self.apply_vec(y)),
        }
    }

    /// `sqrt(max(x^T M x, 0))`.
    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.dot(x, x).max(0.0).sqrt()
    }

    /// Gram block `X^T M Y`.
    pub fn gram(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            InnerProduct::Identity => x.transpose() * y,
            _ => x.transpose() * self.apply_mat(y),
        }
    }

    /// Restriction `V^T M V` to the span of `V`, as a dense weight.
    pub fn restrict(&self, v: &DMatrix<f64>) -> InnerProduct {
        let g = self.gram(v, v);
        // symmetrize to wash out round-off before the constructor's check
        let g = (&g + g.transpose()) * 0.5;
        InnerProduct::Dense(g)
    }
}

fn check_finite(name: &'static str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} contains non-finite entries")))
    }
}

/// Orthonormalizes the columns of `v` in the inner product `m` by modified
/// Gram-Schmidt with a second re-orthogonalization pass.
///
/// Columns whose norm after orthogonalization falls below `drop_tol` times
/// their original norm are dropped, so the result may have fewer columns
/// than the input; it always satisfies `V^T M V = I` to within
/// [`ORTHONORMALITY_TOL`]. Zero columns are always dropped.
pub fn orthonormalize(
    v: &DMatrix<f64>,
    m: &InnerProduct,
    drop_tol: f64,
) -> Result<DMatrix<f64>> {
    check_finite("basis matrix", v)?;
    if !(drop_tol.is_finite() && drop_tol >= 0.0) {
        return Err(Error::invalid(format!("drop tolerance {drop_tol} must be >= 0")));
    }
    m.check_dim(v.nrows())?;
    let n = v.nrows();
    let mut kept: Vec<DVector<f64>> = Vec::new();
    // cache M q for every kept column so each projection is one dot product
    let mut kept_m: Vec<DVector<f64>> = Vec::new();
    for j in 0..v.ncols() {
        let mut w = v.column(j).clone_owned();
        let norm0 = m.norm(&w);
        if norm0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for (q, mq) in kept.iter().zip(&kept_m) {
                let c = mq.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let nrm = m.norm(&w);
        if nrm > 0.0 && nrm >= drop_tol * norm0 {
            w /= nrm;
            kept_m.push(m.apply_vec(&w));
            kept.push(w);
        }
    }
    let mut out = DMatrix::zeros(n, kept.len());
    for (j, q) in kept.iter().enumerate() {
        out.set_column(j, q);
    }
    Ok(out)
}

/// Proper orthogonal decomposition of a snapshot matrix by the method of
/// snapshots.
///
/// Forms the Gram matrix `X^T M X`, solves its symmetric eigenproblem, and
/// lifts the dominant eigenvectors back: mode `i` is `X w_i / sigma_i` with
/// `sigma_i = sqrt(lambda_i)`. Returned modes are `M`-orthonormal; the full
/// vector of POD singular values (descending) accompanies them. Modes are
/// retained while `sigma_i > rtol * sigma_1`, at most `max_modes` of them.
/// A zero snapshot matrix yields no modes and an empty singular value list.
pub fn pod_modes(
    x: &DMatrix<f64>,
    m: &InnerProduct,
    rtol: f64,
    max_modes: usize,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    check_finite("snapshot matrix", x)?;
    if !(rtol.is_finite() && (0.0..=1.0).contains(&rtol)) {
        return Err(Error::invalid(format!("POD tolerance {rtol} must lie in [0, 1]")));
    }
    m.check_dim(x.nrows())?;
    let cols = x.ncols();
    if cols == 0 {
        return Ok((DMatrix::zeros(x.nrows(), 0), vec![]));
    }
    let gram = {
        let g = m.gram(x, x);
        (&g + g.transpose()) * 0.5
    };
    let (w, u) = backend::sym_eigen(&gram)?;
    // Eigenvalues of the Gram matrix below its round-off floor are noise;
    // squashing them to zero keeps sqrt from inflating them into spurious
    // singular values of order sqrt(eps) * sigma_1.
    let lmax = w.iter().fold(0.0f64, |acc, &l| acc.max(l));
    let floor = cols as f64 * f64::EPSILON * lmax;
    // ascending from LAPACK; walk from the back for descending order
    let order: Vec<usize> = (0..cols).rev().collect();
    let sv: Vec<f64> = order
        .iter()
        .map(|&i| if w[i] > floor { w[i].sqrt() } else { 0.0 })
        .collect();
    if sv[0] == 0.0 {
        return Ok((DMatrix::zeros(x.nrows(), 0), vec![]));
    }
    let cutoff = rtol * sv[0];
    let mut retained = 0usize;
    while retained < cols && retained < max_modes && sv[retained] > cutoff && sv[retained] > 0.0 {
        retained += 1;
    }
    let mut modes = DMatrix::zeros(x.nrows(), retained);
    for (k, &i) in order.iter().take(retained).enumerate() {
        let mode = x * u.column(i) / sv[k];
        modes.set_column(k, &mode);
    }
    Ok((modes, sv))
}

/// Truncates a basis to its numerically significant directions via the
/// Euclidean SVD.
///
/// Keeps the left singular vectors whose singular value exceeds
/// `rtol * sigma_1`, at most `max_rank` of them. `rtol` must lie in `(0, 1]`.
pub fn rank_truncate(v: &DMatrix<f64>, rtol: f64, max_rank: usize) -> Result<DMatrix<f64>> {
    check_finite("basis matrix", v)?;
    if !(rtol.is_finite() && rtol > 0.0 && rtol <= 1.0) {
        return Err(Error::invalid(format!(
            "truncation tolerance {rtol} must lie in (0, 1]"
        )));
    }
    if v.ncols() == 0 {
        return Ok(v.clone());
    }
    let svd = v.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = svd.singular_values[idx[0]];
    if smax == 0.0 {
        return Ok(DMatrix::zeros(v.nrows(), 0));
    }
    let mut keep = Vec::new();
    for &i in &idx {
        if keep.len() >= max_rank || svd.singular_values[i] <= rtol * smax {
            break;
        }
        keep.push(i);
    }
    let mut out = DMatrix::zeros(v.nrows(), keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    Ok(out)
}

/// Dense generalized eigendecomposition of the pencil `(A, E)`, intended for
/// reduced-order matrices.
///
/// Refuses problems larger than [`SMALL_PROBLEM_LIMIT`]. Eigenvalues of real
/// pencils come in conjugate pairs; right and left eigenvectors are returned
/// together (see [`GeneralizedEigen`]).
pub fn small_generalized_eig(a: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    if a.nrows() != a.ncols() || e.nrows() != e.ncols() {
        return Err(Error::invalid("pencil matrices must be square"));
    }
    if a.nrows() != e.nrows() {
        return Err(Error::dim(
            "generalized eigenproblem",
            format!("{} x {}", a.nrows(), a.ncols()),
            format!("{} x {}", e.nrows(), e.ncols()),
        ));
    }
    check_finite("pencil matrix A", a)?;
    check_finite("descriptor matrix E", e)?;
    if a.nrows() > SMALL_PROBLEM_LIMIT {
        return Err(Error::UnsupportedSize {
            context: "dense generalized eigenproblem",
            size: a.nrows(),
            limit: SMALL_PROBLEM_LIMIT,
        });
    }
    backend::generalized_eigen(a, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ortho_defect(v: &DMatrix<f64>, m: &InnerProduct) -> f64 {
        let g = m.gram(v, v);
        (g - DMatrix::identity(v.ncols(), v.ncols())).amax()
    }

    fn diag_product(d: &[f64]) -> InnerProduct {
        InnerProduct::sparse(CsrMatrix::from_diagonal(d)).unwrap()
    }

    #[test]
    fn orthonormalize_euclidean() {
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        let q = orthonormalize(&v, &InnerProduct::Identity, 1e-12).unwrap();
        assert_eq!(q.ncols(), 2);
        assert!(ortho_defect(&q, &InnerProduct::Identity) < 1e-14);
        // span is preserved: original columns are reproduced by Q Q^T v
        let proj = &q * q.transpose() * &v;
        assert_relative_eq!(proj, v, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_column_is_dropped() {
        let mut v = DMatrix::zeros(4, 3);
        v.set_column(0, &DVector::from_vec(vec![1.0, 2.0, 0.0, -1.0]));
        v.set_column(1, &DVector::from_vec(vec![1.0, 2.0, 0.0, -1.0]));
        v.set_column(2, &DVector::from_vec(vec![0.0, 1.0, 1.0, 0.0]));
        let q = orthonormalize(&v, &InnerProduct::Identity, 1e-7).unwrap();
        assert_eq!(q.ncols(), 2);
    }

    #[test]
    fn zero_columns_vanish() {
        let v = DMatrix::zeros(3, 2);
        let q = orthonormalize(&v, &InnerProduct::Identity, 0.0).unwrap();
        assert_eq!(q.ncols(), 0);
    }

    #[test]
    fn weighted_orthonormality() {
        let m = diag_product(&[2.0, 1.0, 0.5, 4.0]);
        let v = DMatrix::from_fn(4, 3, |i, j| ((3 * i + 2 * j + 1) % 7) as f64 - 3.0);
        let q = orthonormalize(&v, &m, 1e-12).unwrap();
        assert_eq!(q.ncols(), 3);
        assert!(ortho_defect(&q, &m) < ORTHONORMALITY_TOL);
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut v = DMatrix::zeros(2, 1);
        v[(0, 0)] = f64::INFINITY;
        assert!(orthonormalize(&v, &InnerProduct::Identity, 0.0).is_err());
    }

    #[test]
    fn pod_of_repeated_column() {
        let x0 = DVector::from_vec(vec![3.0, 0.0, 4.0]);
        let n_snap = 5;
        let mut x = DMatrix::zeros(3, n_snap);
        for j in 0..n_snap {
            x.set_column(j, &x0);
        }
        let (modes, sv) = pod_modes(&x, &InnerProduct::Identity, 1e-12, 10).unwrap();
        assert_eq!(modes.ncols(), 1);
        assert_eq!(sv.len(), n_snap);
        assert_relative_eq!(sv[0], (n_snap as f64).sqrt() * 5.0, epsilon = 1e-10);
        assert!(sv[1] < 1e-8);
        // the single mode is x0 normalized, up to sign
        let aligned = modes.column(0).dot(&x0).abs() / x0.norm();
        assert_relative_eq!(aligned, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pod_of_zero_snapshots() {
        let x = DMatrix::zeros(4, 3);
        let (modes, sv) = pod_modes(&x, &InnerProduct::Identity, 0.1, 10).unwrap();
        assert_eq!(modes.ncols(), 0);
        assert!(sv.is_empty());
    }

    #[test]
    fn pod_matches_svd_in_euclidean_product() {
        let x = DMatrix::from_fn(6, 4, |i, j| ((i * 5 + j * 3) % 11) as f64 / 11.0 - 0.4);
        let (modes, sv) = pod_modes(&x, &InnerProduct::Identity, 0.0, 4).unwrap();
        let svd = x.clone().svd(true, false);
        let mut sref: Vec<f64> = svd.singular_values.iter().cloned().collect();
        sref.sort_by(|a, b| b.total_cmp(a));
        for k in 0..4 {
            assert_relative_eq!(sv[k], sref[k], epsilon = 1e-10, max_relative = 1e-8);
        }
        let u = svd.u.unwrap();
        for k in 0..modes.ncols() {
            let overlap = modes.column(k).dot(&u.column(k)).abs();
            assert_relative_eq!(overlap, 1.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn pod_modes_weighted_are_m_orthonormal() {
        let m = diag_product(&[1.0, 3.0, 0.25, 2.0, 5.0]);
        let x = DMatrix::from_fn(5, 6, |i, j| (((2 * i + 3 * j) % 9) as f64 - 4.0) / 3.0);
        let (modes, _) = pod_modes(&x, &m, 1e-10, 4).unwrap();
        assert!(modes.ncols() >= 2);
        assert!(ortho_defect(&modes, &m) < ORTHONORMALITY_TOL);
    }

    #[test]
    fn rank_truncate_validates_rtol() {
        let v = DMatrix::identity(3, 3);
        assert!(rank_truncate(&v, 0.0, 3).is_err());
        assert!(rank_truncate(&v, 1.5, 3).is_err());
    }

    #[test]
    fn rank_truncate_removes_redundancy() {
        // two independent directions plus an exact copy
        let mut v = DMatrix::zeros(4, 3);
        v.set_column(0, &DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]));
        v.set_column(1, &DVector::from_vec(vec![0.0, 1.0, 0.0, 1.0]));
        v.set_column(2, &DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]));
        let t = rank_truncate(&v, 1e-10, 10).unwrap();
        assert_eq!(t.ncols(), 2);
        assert!(ortho_defect(&t, &InnerProduct::Identity) < 1e-12);
        let t1 = rank_truncate(&v, 1e-10, 1).unwrap();
        assert_eq!(t1.ncols(), 1);
    }

    #[test]
    fn generalized_eig_respects_size_limit() {
        let n = SMALL_PROBLEM_LIMIT + 1;
        let a = DMatrix::identity(n, n);
        match small_generalized_eig(&a, &a) {
            Err(Error::UnsupportedSize { .. }) => {}
            other => panic!("expected size error, got {:?}", other.map(|_| ())),
        }
    }
}
