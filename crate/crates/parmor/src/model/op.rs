//! Operator storage and shifted factorizations.
//!
//! System matrices enter as either sparse (full-order, assembled from a
//! discretization) or dense (reduced-order, produced by projection).
//! [`OpMatrix`] lets the rest of the crate stay agnostic: products,
//! transposes, and factorizations of `c_e * E + c_a * A` dispatch on the
//! representation. Sparse pairs with moderate bandwidth are factored by the
//! banded LU from [`crate::sparse::banded`]; everything else falls back to a
//! dense LU.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::banded::{BandMatrix, BandedLu};
use crate::sparse::CsrMatrix;

/// A real system matrix in whichever representation suits its origin.
#[derive(Debug, Clone)]
pub enum OpMatrix {
    Sparse(CsrMatrix),
    Dense(DMatrix<f64>),
}

impl OpMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            OpMatrix::Sparse(m) => m.nrows(),
            OpMatrix::Dense(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            OpMatrix::Sparse(m) => m.ncols(),
            OpMatrix::Dense(m) => m.ncols(),
        }
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            OpMatrix::Sparse(m) => m.matvec(x),
            OpMatrix::Dense(m) => m * x,
        }
    }

    pub fn matvec_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            OpMatrix::Sparse(m) => m.matvec_transpose(x),
            OpMatrix::Dense(m) => m.transpose() * x,
        }
    }

    /// `A X` against a dense block.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            OpMatrix::Sparse(m) => m.mul_dense(x),
            OpMatrix::Dense(m) => m * x,
        }
    }

    /// `A^T X` against a dense block.
    pub fn tr_mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            OpMatrix::Sparse(m) => m.tr_mul_dense(x),
            OpMatrix::Dense(m) => m.transpose() * x,
        }
    }

    pub fn transpose(&self) -> OpMatrix {
        match self {
            OpMatrix::Sparse(m) => OpMatrix::Sparse(m.transpose()),
            OpMatrix::Dense(m) => OpMatrix::Dense(m.transpose()),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            OpMatrix::Sparse(m) => m.to_dense(),
            OpMatrix::Dense(m) => m.clone(),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match self {
            OpMatrix::Sparse(m) => m.clone(),
            OpMatrix::Dense(m) => CsrMatrix::from_dense(m),
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        match self {
            OpMatrix::Sparse(m) => m.is_symmetric(tol),
            OpMatrix::Dense(m) => {
                m.nrows() == m.ncols()
                    && (m - m.transpose()).amax() <= tol * m.amax().max(1.0)
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            OpMatrix::Sparse(m) => m.max_abs(),
            OpMatrix::Dense(m) => m.amax(),
        }
    }
}

/// Decides whether a banded factorization pays off for the combined pattern
/// of two sparse operands, and returns the bandwidths if so.
fn banded_profile(e: &CsrMatrix, a: &CsrMatrix) -> Option<(usize, usize)> {
    let (kle, kue) = e.bandwidths();
    let (kla, kua) = a.bandwidths();
    let (kl, ku) = (kle.max(kla), kue.max(kua));
    let n = e.nrows();
    // beyond roughly a third of the order, fill-in and band bookkeeping cost
    // more than a straight dense factorization
    if n > 0 && 2 * kl + ku + 1 <= n.div_ceil(3).max(8) {
        Some((kl, ku))
    } else {
        None
    }
}

/// LU factorization of a real operator combination.
pub enum RealFactor {
    Banded(BandedLu<f64>),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl RealFactor {
    pub fn solve_in_place(&self, x: &mut DMatrix<f64>) -> Result<()> {
        match self {
            RealFactor::Banded(lu) => {
                lu.solve_mat(x);
                Ok(())
            }
            RealFactor::Dense(lu) => {
                if lu.solve_mut(x) {
                    Ok(())
                } else {
                    Err(Error::Singular("dense LU solve"))
                }
            }
        }
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        self.solve_in_place(&mut x)?;
        Ok(DVector::from_column_slice(x.as_slice()))
    }
}

/// LU factorization of a complex operator combination.
pub enum ComplexFactor {
    Banded(BandedLu<Complex<f64>>),
    Dense(nalgebra::LU<Complex<f64>, nalgebra::Dyn, nalgebra::Dyn>),
}

impl ComplexFactor {
    pub fn solve_in_place(&self, x: &mut DMatrix<Complex<f64>>) -> Result<()> {
        match self {
            ComplexFactor::Banded(lu) => {
                lu.solve_mat(x);
                Ok(())
            }
            ComplexFactor::Dense(lu) => {
                if lu.solve_mut(x) {
                    Ok(())
                } else {
                    Err(Error::Singular("dense LU solve"))
                }
            }
        }
    }
}

/// Factors `c_e * E + c_a * A` with real coefficients.
pub fn factor_real(c_e: f64, e: &OpMatrix, c_a: f64, a: &OpMatrix) -> Result<RealFactor> {
    check_combination(e, a)?;
    match (e, a) {
        (OpMatrix::Sparse(es), OpMatrix::Sparse(as_)) => {
            if let Some((kl, ku)) = banded_profile(es, as_) {
                let n = es.nrows();
                let mut band = BandMatrix::zeros(n, kl, ku);
                for (i, j, v) in es.triplet_iter() {
                    band.add(i, j, c_e * v);
                }
                for (i, j, v) in as_.triplet_iter() {
                    band.add(i, j, c_a * v);
                }
                return band.factor().map(RealFactor::Banded);
            }
            let m = es.to_dense() * c_e + as_.to_dense() * c_a;
            dense_lu_real(m)
        }
        _ => {
            let m = e.to_dense() * c_e + a.to_dense() * c_a;
            dense_lu_real(m)
        }
    }
}

/// Factors `c_e * E + c_a * A` with complex coefficients.
pub fn factor_complex(
    c_e: Complex<f64>,
    e: &OpMatrix,
    c_a: Complex<f64>,
    a: &OpMatrix,
) -> Result<ComplexFactor> {
    check_combination(e, a)?;
    match (e, a) {
        (OpMatrix::Sparse(es), OpMatrix::Sparse(as_)) => {
            if let Some((kl, ku)) = banded_profile(es, as_) {
                let n = es.nrows();
                let mut band = BandMatrix::zeros(n, kl, ku);
                for (i, j, v) in es.triplet_iter() {
                    band.add(i, j, c_e * v);
                }
                for (i, j, v) in as_.triplet_iter() {
                    band.add(i, j, c_a * v);
                }
                return band.factor().map(ComplexFactor::Banded);
            }
            dense_lu_complex(es.to_dense(), as_.to_dense(), c_e, c_a)
        }
        _ => dense_lu_complex(e.to_dense(), a.to_dense(), c_e, c_a),
    }
}

fn check_combination(e: &OpMatrix, a: &OpMatrix) -> Result<()> {
    if !e.is_square() || !a.is_square() || e.nrows() != a.nrows() {
        return Err(Error::dim(
            "operator combination",
            format!("{} x {}", e.nrows(), e.ncols()),
            format!("{} x {}", a.nrows(), a.ncols()),
        ));
    }
    Ok(())
}

fn dense_lu_real(m: DMatrix<f64>) -> Result<RealFactor> {
    let lu = m.lu();
    if lu.u().diagonal().iter().any(|d| *d == 0.0) {
        return Err(Error::Singular("dense LU factorization"));
    }
    Ok(RealFactor::Dense(lu))
}

fn dense_lu_complex(
    e: DMatrix<f64>,
    a: DMatrix<f64>,
    c_e: Complex<f64>,
    c_a: Complex<f64>,
) -> Result<ComplexFactor> {
    let n = e.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| c_e * e[(i, j)] + c_a * a[(i, j)]);
    let lu = m.lu();
    if lu.u().diagonal().iter().any(|d| *d == Complex::new(0.0, 0.0)) {
        return Err(Error::Singular("dense LU factorization"));
    }
    Ok(ComplexFactor::Dense(lu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, -2.0 - 0.1 * i as f64));
            if i + 1 < n {
                t.push((i, i + 1, 1.0));
                t.push((i + 1, i, 0.9));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn real_shifted_factor_banded_and_dense_agree() {
        let n = 30;
        let a = tridiag(n);
        let e = CsrMatrix::identity(n);
        let sparse_f =
            factor_real(1.0, &OpMatrix::Sparse(e.clone()), -0.05, &OpMatrix::Sparse(a.clone()))
                .unwrap();
        assert!(matches!(sparse_f, RealFactor::Banded(_)));
        let dense_f = factor_real(
            1.0,
            &OpMatrix::Dense(e.to_dense()),
            -0.05,
            &OpMatrix::Dense(a.to_dense()),
        )
        .unwrap();
        let b = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin());
        let x1 = sparse_f.solve_vec(&b).unwrap();
        let x2 = dense_f.solve_vec(&b).unwrap();
        assert_relative_eq!(x1, x2, epsilon = 1e-11);
        let m = e.to_dense() - a.to_dense() * 0.05;
        assert_relative_eq!(&m * &x1, b, epsilon = 1e-11);
    }

    #[test]
    fn complex_shift_solves_resolvent() {
        let n = 25;
        let a = tridiag(n);
        let e = CsrMatrix::identity(n);
        let s = Complex::new(0.4, 2.0);
        let f = factor_complex(
            s,
            &OpMatrix::Sparse(e.clone()),
            Complex::new(-1.0, 0.0),
            &OpMatrix::Sparse(a.clone()),
        )
        .unwrap();
        let mut rhs = DMatrix::from_fn(n, 1, |i, _| Complex::new(1.0 / (1.0 + i as f64), 0.0));
        let b0 = rhs.clone();
        f.solve_in_place(&mut rhs).unwrap();
        let ad = a.to_dense().map(|v| Complex::new(v, 0.0));
        let ed = e.to_dense().map(|v| Complex::new(v, 0.0));
        let m = ed * s - ad;
        let resid = (&m * &rhs - &b0).norm() / b0.norm();
        assert!(resid < 1e-12, "residual {resid:.3e}");
    }

    #[test]
    fn singular_combination_is_rejected() {
        let e = OpMatrix::Dense(DMatrix::zeros(3, 3));
        let a = OpMatrix::Dense(DMatrix::identity(3, 3));
        assert!(factor_real(1.0, &e, 0.0, &a).is_err());
    }

    #[test]
    fn wide_band_falls_back_to_dense() {
        // an arrow pattern has full bandwidth; should use the dense path
        let n = 12;
        let mut t = vec![(0usize, n - 1, 1.0), (n - 1, 0usize, 1.0)];
        for i in 0..n {
            t.push((i, i, 3.0));
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let f = factor_real(
            0.0,
            &OpMatrix::Sparse(CsrMatrix::identity(n)),
            1.0,
            &OpMatrix::Sparse(a),
        )
        .unwrap();
        assert!(matches!(f, RealFactor::Dense(_)));
    }
}
