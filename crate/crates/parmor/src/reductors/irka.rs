//! Iterative rational Krylov algorithm, two-sided and one-sided.
//!
//! IRKA iterates on a set of interpolation points and tangential
//! directions: build rational Krylov bases from columns
//! `(s_i E - A)^-1 B b_i` and `(s_i E - A)^-T C^T c_i`, project, read the
//! reduced poles, and restart with the poles mirrored into the right
//! half-plane and tangents taken from the reduced eigenvectors. At a fixed
//! point the reduced model satisfies the bitangential Hermite conditions of
//! H2 optimality.
//!
//! The one-sided variant uses `W = V` (Galerkin). It gives up the Hermite
//! conditions but keeps projected pencils of symmetric-definite models
//! symmetric, so the shifts stay real along the whole iteration — which is
//! asserted, since a complex pole there can only mean a broken model.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, small_generalized_eig, InnerProduct};
use crate::mateq::adi::arnoldi_ritz;
use crate::model::{factor_complex, factor_real, BasisPair, LtiModel, OpMatrix, Parameter};
use crate::reductors::ReductionResult;

/// Relative margin used when a shift or pole sits numerically on the
/// imaginary axis and must be pushed off it.
const AXIS_MARGIN: f64 = 1e-8;

/// Columns this far inside the span of earlier Krylov directions are
/// dropped during orthonormalization.
const KRYLOV_DROP_TOL: f64 = 1e-13;

/// Interpolation data driving one IRKA sweep.
///
/// Shifts are conjugate-closed with pairs adjacent and strictly positive
/// real part; the tangent lists are index-aligned with the shifts. `r`
/// never changes across iterations.
#[derive(Debug, Clone)]
pub struct IrkaState {
    pub shifts: Vec<Complex<f64>>,
    /// Right tangential directions, one `m`-vector per shift.
    pub right_tangents: Vec<DVector<Complex<f64>>>,
    /// Left tangential directions, one `p`-vector per shift.
    pub left_tangents: Vec<DVector<Complex<f64>>>,
    /// Sweeps performed up to and including the one this state fed.
    pub iteration: usize,
}

/// Where the first shift set comes from.
#[derive(Debug, Clone)]
pub enum IrkaInit {
    /// Explicit conjugate-closed points; entries in the left half-plane
    /// are mirrored, entries on the axis nudged off it.
    Shifts(Vec<Complex<f64>>),
    /// `r` logarithmically spaced real points spanning the magnitude range
    /// of a few Arnoldi Ritz values of `E^-1 A`.
    FromPoles,
}

#[derive(Debug, Clone)]
pub struct IrkaDiagnostics {
    /// True when the largest relative shift movement fell to the tolerance.
    pub converged: bool,
    /// Number of sweeps performed.
    pub iterations: usize,
    /// The interpolation data that built the returned model; when
    /// `converged`, the Hermite conditions hold at these shifts.
    pub state: IrkaState,
    /// Largest relative shift movement per sweep.
    pub shift_changes: Vec<f64>,
}

fn unit_tangents(len: usize, dim: usize) -> Vec<DVector<Complex<f64>>> {
    vec![DVector::from_element(dim, Complex::new(1.0, 0.0)); len]
}

/// Validates explicit initial shifts: finite, conjugate-closed, and `r` of
/// them; mirrors left-half-plane entries and reorders so conjugate pairs
/// sit adjacent with the positive-imaginary member first.
fn normalize_shifts(raw: &[Complex<f64>], r: usize) -> Result<Vec<Complex<f64>>> {
    if raw.len() != r {
        return Err(Error::dim(
            "initial shifts",
            format!("{r} shifts"),
            format!("{} given", raw.len()),
        ));
    }
    let mut mirrored: Vec<Complex<f64>> = Vec::with_capacity(r);
    for s in raw {
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(Error::invalid(format!("initial shift {s} is not finite")));
        }
        let mut re = s.re.abs();
        if re == 0.0 {
            re = AXIS_MARGIN * s.norm().max(1.0);
        }
        mirrored.push(Complex::new(re, s.im));
    }
    let mut used = vec![false; r];
    let mut out = Vec::with_capacity(r);
    for i in 0..r {
        if used[i] {
            continue;
        }
        used[i] = true;
        let s = mirrored[i];
        if s.im == 0.0 {
            out.push(s);
            continue;
        }
        let partner = (0..r).find(|&j| !used[j] && mirrored[j] == s.conj());
        match partner {
            Some(j) => {
                used[j] = true;
                let top = if s.im > 0.0 { s } else { s.conj() };
                out.push(top);
                out.push(top.conj());
            }
            None => {
                return Err(Error::invalid(format!(
                    "initial shift {s} has no conjugate partner"
                )));
            }
        }
    }
    Ok(out)
}

/// Default initialization: real shifts log-spaced over the magnitude range
/// of Arnoldi Ritz values of `E^-1 A`, widened when the estimated range is
/// too narrow to give `r` usefully distinct points.
fn default_shifts(a: &OpMatrix, e: &OpMatrix, r: usize, n: usize) -> Result<Vec<Complex<f64>>> {
    let probe = n.min((2 * r).max(12));
    let ritz = arnoldi_ritz(a, e, probe)?;
    let (mut lo, mut hi) = ritz.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), l| {
        let m = l.norm();
        (lo.min(m), hi.max(m))
    });
    if !(hi.is_finite() && hi > 0.0) {
        return Err(Error::invalid(
            "spectrum probe found no usable eigenvalue magnitudes",
        ));
    }
    lo = lo.max(hi * 1e-12);
    if r > 1 && hi / lo < 100.0 {
        let center = (lo * hi).sqrt();
        lo = center / 10.0;
        hi = center * 10.0;
    }
    let shifts = if r == 1 {
        vec![Complex::new((lo * hi).sqrt(), 0.0)]
    } else {
        let (llo, lhi) = (lo.log10(), hi.log10());
        (0..r)
            .map(|j| {
                let t = j as f64 / (r - 1) as f64;
                Complex::new(10f64.powf(llo + t * (lhi - llo)), 0.0)
            })
            .collect()
    };
    Ok(shifts)
}

fn complex_mat(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

/// Solves `(s E - A) x = rhs` for one real shift, with the
/// perturb-and-retry fallback when the shift collides with an eigenvalue.
/// The possibly perturbed shift value is written back.
fn real_krylov_column(
    s: &mut Complex<f64>,
    e: &OpMatrix,
    a: &OpMatrix,
    rhs: &DVector<f64>,
) -> Result<DVector<f64>> {
    for attempt in 0..2 {
        match factor_real(s.re, e, -1.0, a).and_then(|f| f.solve_vec(rhs)) {
            Ok(x) => return Ok(x),
            Err(Error::Singular(_)) | Err(Error::SingularPencil(_)) if attempt == 0 => {
                s.re += AXIS_MARGIN * s.norm();
            }
            Err(err) => return Err(err),
        }
    }
    unreachable!("second attempt either returned or propagated its error");
}

/// Complex-pair analogue of [`real_krylov_column`]; both members of the
/// conjugate pair move together when a retry perturbs the shift.
fn complex_krylov_column(
    s: &mut Complex<f64>,
    e: &OpMatrix,
    a: &OpMatrix,
    rhs: &DVector<Complex<f64>>,
) -> Result<DVector<Complex<f64>>> {
    for attempt in 0..2 {
        let solved = factor_complex(*s, e, Complex::new(-1.0, 0.0), a).and_then(|f| {
            let mut x = DMatrix::from_columns(&[rhs.clone()]);
            f.solve_in_place(&mut x)?;
            Ok(x.column(0).clone_owned())
        });
        match solved {
            Ok(x) => return Ok(x),
            Err(Error::Singular(_)) | Err(Error::SingularPencil(_)) if attempt == 0 => {
                s.re += AXIS_MARGIN * s.norm();
            }
            Err(err) => return Err(err),
        }
    }
    unreachable!("second attempt either returned or propagated its error");
}

/// Builds the rational Krylov basis (and, two-sided, its left companion)
/// for the current state. Conjugate shift pairs contribute the real and
/// imaginary parts of one complex solve. Shifts perturbed by the
/// singular-solve fallback are updated in the state.
fn build_bases(
    state: &mut IrkaState,
    e: &OpMatrix,
    a: &OpMatrix,
    transposed: Option<&(OpMatrix, OpMatrix)>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>)> {
    let n = e.nrows();
    let r = state.shifts.len();
    let b_c = complex_mat(b);
    let ct_c = complex_mat(&c.transpose());
    let mut v = DMatrix::<f64>::zeros(n, r);
    let mut w = transposed.map(|_| DMatrix::<f64>::zeros(n, r));
    let mut i = 0usize;
    while i < r {
        if state.shifts[i].im == 0.0 {
            // real shift: real tangents (any residual imaginary part is an
            // artifact and is dropped)
            let bt = state.right_tangents[i].map(|z| z.re);
            let mut s = state.shifts[i];
            let col = real_krylov_column(&mut s, e, a, &(b * &bt))?;
            v.set_column(i, &col);
            if let (Some(w), Some((et, at))) = (w.as_mut(), transposed) {
                let ct = state.left_tangents[i].map(|z| z.re);
                let col = real_krylov_column(&mut s, et, at, &(c.transpose() * &ct))?;
                w.set_column(i, &col);
            }
            state.shifts[i] = s;
            i += 1;
        } else {
            let mut s = state.shifts[i];
            let z = complex_krylov_column(&mut s, e, a, &(&b_c * &state.right_tangents[i]))?;
            v.set_column(i, &z.map(|x| x.re));
            v.set_column(i + 1, &z.map(|x| x.im));
            if let (Some(w), Some((et, at))) = (w.as_mut(), transposed) {
                let z = complex_krylov_column(&mut s, et, at, &(&ct_c * &state.left_tangents[i]))?;
                w.set_column(i, &z.map(|x| x.re));
                w.set_column(i + 1, &z.map(|x| x.im));
            }
            state.shifts[i] = s;
            state.shifts[i + 1] = s.conj();
            i += 2;
        }
    }
    let v = orthonormalize(&v, &InnerProduct::Identity, KRYLOV_DROP_TOL)?;
    let w = match w {
        Some(w) => Some(orthonormalize(&w, &InnerProduct::Identity, KRYLOV_DROP_TOL)?),
        None => None,
    };
    Ok((v, w))
}

/// Largest relative movement between two shift sets, compared after
/// sorting; incomparable sizes count as no progress.
fn shift_change(old: &[Complex<f64>], new: &[Complex<f64>]) -> f64 {
    if old.len() != new.len() {
        return f64::INFINITY;
    }
    let key = |a: &Complex<f64>, b: &Complex<f64>| {
        a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
    };
    let mut o: Vec<_> = old.to_vec();
    let mut n: Vec<_> = new.to_vec();
    o.sort_by(key);
    n.sort_by(key);
    o.iter()
        .zip(&n)
        .map(|(a, b)| (a - b).norm() / a.norm())
        .fold(0.0, f64::max)
}

/// One pole-mirroring update: eigendecompose the projected pencil, reflect
/// any right-half-plane pole, nudge axis-bound ones, and read the next
/// shifts and tangents off the eigentriples.
fn next_state(
    rom: &LtiModel,
    mu_r: &Parameter,
    iteration: usize,
    assert_real: bool,
) -> Result<IrkaState> {
    let a_r = rom.eval_a(mu_r)?.to_dense();
    let e_r = rom.e().to_dense();
    let ge = small_generalized_eig(&a_r, &e_r)?;
    let b_t = complex_mat(&rom.b().transpose());
    let c_c = complex_mat(rom.c());
    let order = ge.values.len();
    let mut shifts = Vec::with_capacity(order);
    let mut right_tangents = Vec::with_capacity(order);
    let mut left_tangents = Vec::with_capacity(order);
    for (k, lambda) in ge.values.iter().enumerate() {
        if assert_real && lambda.im.abs() > AXIS_MARGIN * lambda.norm().max(1.0) {
            return Err(Error::InternalConsistency(format!(
                "one-sided iteration produced complex pole {lambda} on a \
                 symmetric-definite model; the projected pencil should be symmetric"
            )));
        }
        let mut re = -lambda.re.abs();
        if re == 0.0 {
            re = -AXIS_MARGIN * lambda.norm().max(1.0);
        }
        // stabilized pole -> mirrored interpolation point
        shifts.push(Complex::new(-re, -lambda.im));
        let normalized = |t: DVector<Complex<f64>>, dim: usize| {
            let nrm = t.norm();
            if nrm > 0.0 {
                t / Complex::new(nrm, 0.0)
            } else {
                DVector::from_element(dim, Complex::new(1.0, 0.0))
            }
        };
        let bt = &b_t * ge.left.column(k);
        right_tangents.push(normalized(bt, rom.num_inputs()));
        let ct = &c_c * ge.right.column(k);
        left_tangents.push(normalized(ct, rom.num_outputs()));
    }
    Ok(IrkaState {
        shifts,
        right_tangents,
        left_tangents,
        iteration,
    })
}

#[allow(clippy::too_many_arguments)]
fn irka_impl(
    fom: &LtiModel,
    mu: &Parameter,
    r: usize,
    init: IrkaInit,
    max_iter: usize,
    conv_tol: f64,
    one_sided: bool,
) -> Result<ReductionResult<IrkaDiagnostics>> {
    let n = fom.order();
    if r == 0 || r > n {
        return Err(Error::invalid(format!(
            "reduced order {r} must lie in 1..={n}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::invalid("need at least one iteration"));
    }
    if !(conv_tol.is_finite() && conv_tol > 0.0) {
        return Err(Error::invalid(format!(
            "convergence tolerance {conv_tol} must be positive"
        )));
    }
    let a_mu = fom.eval_a(mu)?;
    let e = fom.e();
    let transposed = (!one_sided).then(|| (e.transpose(), a_mu.transpose()));
    // a complex pole of a symmetric-definite pencil under Galerkin
    // projection signals a broken assembly, not a numerical accident
    let assert_real = one_sided && e.is_symmetric(1e-12) && a_mu.is_symmetric(1e-12);

    let mut state = IrkaState {
        shifts: match init {
            IrkaInit::Shifts(s) => normalize_shifts(&s, r)?,
            IrkaInit::FromPoles => default_shifts(&a_mu, e, r, n)?,
        },
        right_tangents: unit_tangents(r, fom.num_inputs()),
        left_tangents: unit_tangents(r, fom.num_outputs()),
        iteration: 0,
    };

    let mut shift_changes = Vec::new();
    let mut converged = false;
    let mut last: Option<(LtiModel, BasisPair, IrkaState)> = None;
    for it in 1..=max_iter {
        let (v, w) = build_bases(&mut state, e, &a_mu, transposed.as_ref(), fom.b(), fom.c())?;
        // coincident or numerically dependent shifts can collapse the
        // Krylov space below the requested order — routine once the target
        // order over-resolves the system. The iteration then simply carries
        // on at the surviving width: the next eigendecomposition produces
        // that many shifts, so the state shrinks consistently.
        let width = w.as_ref().map_or(v.ncols(), |w| w.ncols().min(v.ncols()));
        if width == 0 {
            return Err(Error::DegenerateProjection { order: 0 });
        }
        let v = v.columns(0, width).clone_owned();
        let w = w.map(|w| w.columns(0, width).clone_owned());
        let basis = match w {
            Some(w) => BasisPair::petrov_galerkin(v, w)?,
            None => BasisPair::galerkin(v),
        };
        let rom = fom.project(&basis)?;
        state.iteration = it;
        let next = next_state(&rom, mu, it, assert_real)?;
        let change = shift_change(&state.shifts, &next.shifts);
        shift_changes.push(change);
        last = Some((rom, basis, state));
        state = next;
        if change <= conv_tol {
            converged = true;
            break;
        }
    }
    let (rom, basis, built_from) = last.expect("at least one sweep ran");
    Ok(ReductionResult {
        rom,
        basis,
        diagnostics: IrkaDiagnostics {
            converged,
            iterations: shift_changes.len(),
            state: built_from,
            shift_changes,
        },
    })
}

/// Two-sided tangential IRKA at the frozen parameter `mu`.
///
/// Petrov-Galerkin projection onto rational Krylov spaces, iterated until
/// the shifts settle (largest relative movement at `conv_tol`) or
/// `max_iter` sweeps have run; an unconverged run is returned with the
/// flag down, not an error. The returned model belongs to the last basis
/// built, and the diagnostics carry exactly the interpolation data that
/// built it. When `r` over-resolves the system the Krylov directions go
/// numerically dependent and the iteration carries on at the surviving
/// width, so the returned order can come out smaller than requested.
pub fn irka(
    fom: &LtiModel,
    mu: &Parameter,
    r: usize,
    init: IrkaInit,
    max_iter: usize,
    conv_tol: f64,
) -> Result<ReductionResult<IrkaDiagnostics>> {
    irka_impl(fom, mu, r, init, max_iter, conv_tol, false)
}

/// One-sided IRKA: the Galerkin variant with `W = V`.
///
/// On symmetric-definite models every projected pole is provably real, so
/// the shift set stays real along the iteration — violated only by a
/// broken model, which is reported as an internal-consistency error.
pub fn os_irka(
    fom: &LtiModel,
    mu: &Parameter,
    r: usize,
    init: IrkaInit,
    max_iter: usize,
    conv_tol: f64,
) -> Result<ReductionResult<IrkaDiagnostics>> {
    irka_impl(fom, mu, r, init, max_iter, conv_tol, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AffineOperator;
    use crate::sparse::CsrMatrix;
    use crate::thermalblock::{build, OutputMode, ThermalBlockSpec};
    use approx::assert_relative_eq;

    fn scalar_model() -> LtiModel {
        LtiModel::new(
            OpMatrix::Sparse(CsrMatrix::identity(1)),
            AffineOperator::constant(OpMatrix::Sparse(CsrMatrix::from_diagonal(&[-1.0]))),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            InnerProduct::Identity,
        )
        .unwrap()
    }

    fn diag_model(eigs: &[f64]) -> LtiModel {
        let n = eigs.len();
        LtiModel::new(
            OpMatrix::Sparse(CsrMatrix::identity(n)),
            AffineOperator::constant(OpMatrix::Sparse(CsrMatrix::from_diagonal(eigs))),
            DMatrix::from_element(n, 1, 1.0),
            DMatrix::from_element(1, n, 1.0),
            InnerProduct::Identity,
        )
        .unwrap()
    }

    #[test]
    fn scalar_fixed_point_is_immediate() {
        let fom = scalar_model();
        let mu = Parameter::empty();
        let result = irka(&fom, &mu, 1, IrkaInit::FromPoles, 50, 1e-10).unwrap();
        assert!(result.diagnostics.converged);
        assert_eq!(result.diagnostics.iterations, 1);
        let sigma = result.diagnostics.state.shifts[0];
        assert_relative_eq!(sigma.re, 1.0, epsilon = 1e-12);
        assert_eq!(sigma.im, 0.0);
        // ROM is a full realization of the FOM
        let s = Complex::new(0.0, 2.0);
        let d = (fom.transfer(&mu, s).unwrap() - result.rom.transfer(&mu, s).unwrap()).norm();
        assert!(d < 1e-12);
    }

    #[test]
    fn full_order_reproduces_transfer_in_one_sweep() {
        let fom = diag_model(&[-1.0, -3.0, -10.0]);
        let mu = Parameter::empty();
        for one_sided in [false, true] {
            let run = if one_sided { os_irka } else { irka };
            let result = run(&fom, &mu, 3, IrkaInit::FromPoles, 1, 1e-4).unwrap();
            for k in 0..8 {
                let s = Complex::new(0.0, 10f64.powf(-1.0 + k as f64 / 3.0));
                let d =
                    (fom.transfer(&mu, s).unwrap() - result.rom.transfer(&mu, s).unwrap()).norm();
                let h = fom.transfer(&mu, s).unwrap().norm();
                assert!(d < 1e-8 * h.max(1.0), "gap {d:.3e} (one_sided={one_sided})");
            }
        }
    }

    /// Central finite difference of the scalar transfer function.
    fn transfer_and_derivative(
        m: &LtiModel,
        mu: &Parameter,
        s: Complex<f64>,
    ) -> (Complex<f64>, Complex<f64>) {
        let h = Complex::new(1e-6 * s.norm(), 0.0);
        let f = |z: Complex<f64>| m.transfer(mu, z).unwrap()[(0, 0)];
        (f(s), (f(s + h) - f(s - h)) / (2.0 * h))
    }

    #[test]
    fn converged_run_satisfies_hermite_conditions() {
        let fom = diag_model(&[-1.0, -2.0, -5.0]);
        let mu = Parameter::empty();
        let result = irka(&fom, &mu, 1, IrkaInit::FromPoles, 100, 1e-10).unwrap();
        assert!(result.diagnostics.converged);
        let sigma = result.diagnostics.state.shifts[0];
        let (h, dh) = transfer_and_derivative(&fom, &mu, sigma);
        let (hr, dhr) = transfer_and_derivative(&result.rom, &mu, sigma);
        assert!(
            (h - hr).norm() <= 1e-6 * h.norm(),
            "value gap {:.3e}",
            (h - hr).norm() / h.norm()
        );
        assert!(
            (dh - dhr).norm() <= 1e-5 * dh.norm(),
            "derivative gap {:.3e}",
            (dh - dhr).norm() / dh.norm()
        );
    }

    #[test]
    fn complex_initial_shifts_are_realified() {
        let fom = diag_model(&[-1.0, -2.0, -5.0, -9.0]);
        let mu = Parameter::empty();
        let init = IrkaInit::Shifts(vec![
            Complex::new(1.0, 2.0),
            Complex::new(1.0, -2.0),
            Complex::new(-4.0, 0.0), // mirrored to +4
            Complex::new(7.0, 0.0),
        ]);
        let result = irka(&fom, &mu, 4, init, 60, 1e-8).unwrap();
        // symmetric FOM: the optimal shifts are real, and the full-order
        // fit is exact regardless
        for s in &result.diagnostics.state.shifts {
            assert!(s.re > 0.0);
        }
        let s = Complex::new(0.0, 1.3);
        let d = (fom.transfer(&mu, s).unwrap() - result.rom.transfer(&mu, s).unwrap()).norm();
        assert!(d < 1e-9);
    }

    #[test]
    fn unbalanced_conjugates_are_rejected() {
        let fom = diag_model(&[-1.0, -2.0]);
        let init = IrkaInit::Shifts(vec![Complex::new(1.0, 2.0), Complex::new(3.0, 0.0)]);
        match irka(&fom, &Parameter::empty(), 2, init, 10, 1e-6) {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected invalid-input error, got {other:?}"),
        }
    }

    #[test]
    fn thermal_block_os_irka_keeps_real_shifts() {
        let spec = ThermalBlockSpec::new(2, 8, OutputMode::DomainAverage).unwrap();
        let fom = build(&spec).unwrap();
        let mu = Parameter::ones(4);
        let result = os_irka(&fom, &mu, 4, IrkaInit::FromPoles, 60, 1e-6).unwrap();
        // every recorded shift of the final state is real and positive;
        // intermediate complex ones would have tripped the internal
        // assertion because the pencil is symmetric-definite
        for s in &result.diagnostics.state.shifts {
            assert_eq!(s.im, 0.0, "complex shift {s} survived");
            assert!(s.re > 0.0);
        }
        assert!(result.diagnostics.converged);
    }

    #[test]
    fn scalar_one_and_two_sided_coincide() {
        let fom = scalar_model();
        let mu = Parameter::empty();
        let two = irka(&fom, &mu, 1, IrkaInit::FromPoles, 30, 1e-10).unwrap();
        let one = os_irka(&fom, &mu, 1, IrkaInit::FromPoles, 30, 1e-10).unwrap();
        let s = Complex::new(0.5, 0.5);
        let d = (two.rom.transfer(&mu, s).unwrap() - one.rom.transfer(&mu, s).unwrap()).norm();
        assert!(d < 1e-12);
    }

    #[test]
    fn non_convergence_is_flagged_not_fatal() {
        let fom = diag_model(&[-1.0, -2.0, -5.0, -11.0]);
        // one sweep from a poor start cannot settle to 1e-12
        let init = IrkaInit::Shifts(vec![Complex::new(300.0, 0.0), Complex::new(500.0, 0.0)]);
        let result = irka(&fom, &Parameter::empty(), 2, init, 1, 1e-12).unwrap();
        assert!(!result.diagnostics.converged);
        assert_eq!(result.diagnostics.iterations, 1);
        assert_eq!(result.diagnostics.shift_changes.len(), 1);
    }

    #[test]
    fn shift_on_eigenvalue_is_perturbed_and_survives() {
        // sigma = 1 collides with the eigenvalue of (E - sigma^-1 A)...
        // more directly: A = diag(-1, -2) with shift exactly at -(-1) = 1
        // does not make (sE - A) singular; a collision needs sigma equal to
        // an eigenvalue of the pencil (A, E), i.e. sigma in the left
        // half-plane, which normalization rules out. Force the degenerate
        // case with an unstable-looking explicit imaginary pair instead:
        // the nudge keeps the solve regular.
        let fom = diag_model(&[-1.0, -2.0]);
        let init = IrkaInit::Shifts(vec![Complex::new(0.0, 1.0), Complex::new(0.0, -1.0)]);
        let result = irka(&fom, &Parameter::empty(), 2, init, 40, 1e-8).unwrap();
        let s = Complex::new(0.0, 0.7);
        let mu = Parameter::empty();
        let d = (fom.transfer(&mu, s).unwrap() - result.rom.transfer(&mu, s).unwrap()).norm();
        assert!(d < 1e-9, "full-order refit failed: {d:.3e}");
    }

    #[test]
    fn invalid_orders_and_tolerances_are_rejected() {
        let fom = diag_model(&[-1.0, -2.0]);
        let mu = Parameter::empty();
        assert!(irka(&fom, &mu, 0, IrkaInit::FromPoles, 10, 1e-6).is_err());
        assert!(irka(&fom, &mu, 3, IrkaInit::FromPoles, 10, 1e-6).is_err());
        assert!(irka(&fom, &mu, 1, IrkaInit::FromPoles, 0, 1e-6).is_err());
        assert!(irka(&fom, &mu, 1, IrkaInit::FromPoles, 10, 0.0).is_err());
    }
}
