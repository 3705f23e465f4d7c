//! Thin safe wrappers over the LAPACK routines this crate relies on.
//!
//! nalgebra's own decompositions cover most needs, but three kernels are
//! delegated to LAPACK for robustness and speed at the sizes the experiment
//! suite uses (operators around order 10^3): the real Schur form (`dgees`),
//! the symmetric eigendecomposition (`dsyev`), and the quasi-triangular
//! Sylvester solve (`dtrsyl`). The generalized eigenvalue problem (`dggev`)
//! is wrapped because left eigenvectors are needed for tangential
//! interpolation and nalgebra does not expose them.
//!
//! All wrappers take column-major `DMatrix` storage, which is what LAPACK
//! expects, and translate `info != 0` into [`Error::Backend`].

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Real Schur decomposition `A = Q T Q^T` with `Q` orthogonal and `T`
/// quasi-upper-triangular. Returns `(Q, T, eigenvalues)`.
pub fn real_schur(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<Complex<f64>>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "Schur decomposition needs a square matrix");
    let ni = n as i32;
    let mut t = a.clone();
    let mut q = DMatrix::<f64>::zeros(n, n);
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut sdim = 0i32;
    let mut info = 0i32;

    let mut work = vec![0.0f64];
    unsafe {
        lapack::dgees(
            b'V', b'N', None, ni, t.as_mut_slice(), ni, &mut sdim, &mut wr, &mut wi,
            q.as_mut_slice(), ni, &mut work, -1, &mut [], &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend { routine: "dgees (workspace query)", info });
    }
    let lwork = work[0] as usize;
    let mut work = vec![0.0f64; lwork.max(1)];
    unsafe {
        lapack::dgees(
            b'V', b'N', None, ni, t.as_mut_slice(), ni, &mut sdim, &mut wr, &mut wi,
            q.as_mut_slice(), ni, &mut work, lwork as i32, &mut [], &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend { routine: "dgees", info });
    }
    let eigs = wr.iter().zip(&wi).map(|(&re, &im)| Complex::new(re, im)).collect();
    Ok((q, t, eigs))
}

/// Symmetric eigendecomposition `A = U diag(w) U^T`.
/// Returns eigenvalues in ascending order and orthonormal eigenvectors as
/// the columns of `U`. Only the lower triangle of `a` is referenced.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric eigendecomposition needs a square matrix");
    let ni = n as i32;
    let mut u = a.clone();
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;

    let mut work = vec![0.0f64];
    unsafe {
        lapack::dsyev(b'V', b'L', ni, u.as_mut_slice(), ni, &mut w, &mut work, -1, &mut info);
    }
    if info != 0 {
        return Err(Error::Backend { routine: "dsyev (workspace query)", info });
    }
    let lwork = work[0] as usize;
    let mut work = vec![0.0f64; lwork.max(1)];
    unsafe {
        lapack::dsyev(
            b'V', b'L', ni, u.as_mut_slice(), ni, &mut w, &mut work, lwork as i32, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend { routine: "dsyev", info });
    }
    Ok((DVector::from_vec(w), u))
}

/// Solves the quasi-triangular Sylvester equation
/// `op(T_a) X + isgn * X op(T_b) = C` where `T_a`, `T_b` are Schur factors
/// and `op` is transposition when the corresponding flag is set. Returns the
/// solution with the internal LAPACK scaling already divided out.
pub fn trsyl(
    trans_a: bool,
    trans_b: bool,
    isgn: i32,
    t_a: &DMatrix<f64>,
    t_b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let m = t_a.nrows() as i32;
    let n = t_b.nrows() as i32;
    assert_eq!(t_a.nrows(), t_a.ncols());
    assert_eq!(t_b.nrows(), t_b.ncols());
    assert_eq!(c.nrows(), t_a.nrows());
    assert_eq!(c.ncols(), t_b.nrows());
    let mut x = c.clone();
    let mut scale = [0.0f64];
    let mut info = 0i32;
    let ta = if trans_a { b'T' } else { b'N' };
    let tb = if trans_b { b'T' } else { b'N' };
    unsafe {
        lapack::dtrsyl(
            ta, tb, &[isgn], m, n, t_a.as_slice(), m.max(1), t_b.as_slice(), n.max(1),
            x.as_mut_slice(), m.max(1), &mut scale, &mut info,
        );
    }
    // info == 1 flags perturbed near-common eigenvalues; the caller's residual
    // check decides whether the result is acceptable.
    if info < 0 {
        return Err(Error::Backend { routine: "dtrsyl", info });
    }
    if scale[0] == 0.0 {
        return Err(Error::Singular("dtrsyl returned zero scale"));
    }
    if scale[0] != 1.0 {
        x /= scale[0];
    }
    Ok(x)
}

/// Eigenvalues and right/left eigenvectors of the pencil `(A, E)`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Eigenvalues; complex conjugate pairs are adjacent, the member with
    /// positive imaginary part first.
    pub values: Vec<Complex<f64>>,
    /// Right eigenvectors (columns): `A v = lambda E v`.
    pub right: DMatrix<Complex<f64>>,
    /// Left eigenvectors (columns): `w^H A = lambda w^H E`.
    pub left: DMatrix<Complex<f64>>,
}

/// Full solution of the generalized eigenproblem via `dggev`.
///
/// Fails with [`Error::SingularPencil`] when an eigenvalue is infinite or
/// numerically undefined (`beta` negligible), which happens exactly when `E`
/// is singular along some deflating subspace.
pub fn generalized_eigen(a: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "pencil matrices must be square");
    assert_eq!(e.nrows(), n);
    assert_eq!(e.ncols(), n);
    if n == 0 {
        return Ok(GeneralizedEigen {
            values: vec![],
            right: DMatrix::zeros(0, 0),
            left: DMatrix::zeros(0, 0),
        });
    }
    let ni = n as i32;
    let mut aa = a.clone();
    let mut ee = e.clone();
    let mut alphar = vec![0.0f64; n];
    let mut alphai = vec![0.0f64; n];
    let mut beta = vec![0.0f64; n];
    let mut vl = DMatrix::<f64>::zeros(n, n);
    let mut vr = DMatrix::<f64>::zeros(n, n);
    let mut info = 0i32;

    let mut work = vec![0.0f64];
    unsafe {
        lapack::dggev(
            b'V', b'V', ni, aa.as_mut_slice(), ni, ee.as_mut_slice(), ni,
            &mut alphar, &mut alphai, &mut beta,
            vl.as_mut_slice(), ni, vr.as_mut_slice(), ni, &mut work, -1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend { routine: "dggev (workspace query)", info });
    }
    let lwork = work[0] as usize;
    let mut work = vec![0.0f64; lwork.max(1)];
    unsafe {
        lapack::dggev(
            b'V', b'V', ni, aa.as_mut_slice(), ni, ee.as_mut_slice(), ni,
            &mut alphar, &mut alphai, &mut beta,
            vl.as_mut_slice(), ni, vr.as_mut_slice(), ni, &mut work, lwork as i32, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend { routine: "dggev", info });
    }

    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let anorm = (alphar[j].powi(2) + alphai[j].powi(2)).sqrt();
        if beta[j].abs() <= 1e-12 * (anorm + beta[j].abs()) || beta[j] == 0.0 {
            return Err(Error::SingularPencil(format!(
                "eigenvalue {j}: alpha = {:.3e} + {:.3e}i, beta = {:.3e}",
                alphar[j], alphai[j], beta[j]
            )));
        }
        values.push(Complex::new(alphar[j] / beta[j], alphai[j] / beta[j]));
    }

    // dggev packs complex conjugate eigenvector pairs into two real columns
    // (real part, imaginary part); unpack into genuinely complex columns.
    let unpack = |v: &DMatrix<f64>| -> DMatrix<Complex<f64>> {
        let mut out = DMatrix::<Complex<f64>>::zeros(n, n);
        let mut j = 0usize;
        while j < n {
            if alphai[j] != 0.0 && j + 1 < n {
                for i in 0..n {
                    let (re, im) = (v[(i, j)], v[(i, j + 1)]);
                    out[(i, j)] = Complex::new(re, im);
                    out[(i, j + 1)] = Complex::new(re, -im);
                }
                j += 2;
            } else {
                for i in 0..n {
                    out[(i, j)] = Complex::new(v[(i, j)], 0.0);
                }
                j += 1;
            }
        }
        out
    };

    Ok(GeneralizedEigen {
        values,
        right: unpack(&vr),
        left: unpack(&vl),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schur_reconstructs_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, -1.0, 0.0, 1.0, 0.25, -0.5, -2.0]);
        let (q, t, eigs) = real_schur(&a).unwrap();
        assert_relative_eq!(&q * &t * q.transpose(), a.clone(), epsilon = 1e-12);
        assert_relative_eq!(&q * q.transpose(), DMatrix::identity(3, 3), epsilon = 1e-12);
        // eigenvalue sum equals the trace
        let tr: Complex<f64> = eigs.iter().sum();
        assert_relative_eq!(tr.re, a.trace(), epsilon = 1e-12);
        assert_relative_eq!(tr.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sym_eigen_on_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (w, u) = sym_eigen(&a).unwrap();
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-13);
        assert_relative_eq!(w[1], 3.0, epsilon = 1e-13);
        let rebuilt = &u * DMatrix::from_diagonal(&w) * u.transpose();
        assert_relative_eq!(rebuilt, a, epsilon = 1e-13);
    }

    #[test]
    fn trsyl_solves_triangular_sylvester() {
        // T_a X + X T_b^T = C with upper-triangular factors; verify directly.
        let ta = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let tb = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 1.0, -4.0]);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let x = trsyl(false, true, 1, &ta, &tb, &c).unwrap();
        let resid = &ta * &x + &x * tb.transpose() - &c;
        assert!(resid.norm() < 1e-13);
    }

    #[test]
    fn generalized_eigen_diagonal_pencil() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, -6.0]));
        let e = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let ge = generalized_eigen(&a, &e).unwrap();
        let mut re: Vec<f64> = ge.values.iter().map(|v| v.re).collect();
        re.sort_by(f64::total_cmp);
        assert_relative_eq!(re[0], -3.0, epsilon = 1e-12);
        assert_relative_eq!(re[1], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn generalized_eigen_residuals_and_pairs() {
        // damped rotation: complex eigenvalues come in conjugate pairs
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 4.0, -4.0, -1.0]);
        let e = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let ge = generalized_eigen(&a, &e).unwrap();
        assert_relative_eq!(ge.values[0].im, -ge.values[1].im, epsilon = 1e-12);
        let ac = a.map(|v| Complex::new(v, 0.0));
        let ec = e.map(|v| Complex::new(v, 0.0));
        for (k, lam) in ge.values.iter().enumerate() {
            let v = ge.right.column(k).clone_owned();
            let r = &ac * &v - &ec * &v * *lam;
            assert!(r.norm() < 1e-12 * v.norm() * (a.norm() + lam.norm() * e.norm()));
            let w = ge.left.column(k).clone_owned();
            let rl = ac.adjoint() * &w - ec.adjoint() * &w * lam.conj();
            assert!(rl.norm() < 1e-12 * w.norm() * (a.norm() + lam.norm() * e.norm()));
        }
    }

    #[test]
    fn singular_descriptor_is_detected() {
        let a = DMatrix::identity(2, 2);
        let e = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        match generalized_eigen(&a, &e) {
            Err(Error::SingularPencil(_)) => {}
            other => panic!("expected singular-pencil error, got {other:?}"),
        }
    }
}
