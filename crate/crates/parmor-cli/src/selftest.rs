//! Numerical self-checks.
//!
//! `parmor selftest` replays a compact version of the oracle suite the
//! library is tested against: closed-form matrix-equation solutions, the
//! Kronecker-vectorization Lyapunov oracle, analytic H2 norms against the
//! time-domain quadrature, and the thermal-block assembly consistency
//! check. It finishes in a few seconds and is the first thing to run when
//! a result looks off on a new machine or BLAS build.

use nalgebra::DMatrix;
use parmor::linalg::InnerProduct;
use parmor::mateq::{lyapunov_residual, solve_lyapunov_dense, solve_riccati_dense, LyapunovMethod};
use parmor::metrics::{h2_norm, h2_norm_side, impulse_quadrature_oracle, GramianSide};
use parmor::model::{AffineOperator, LtiModel, OpMatrix, Parameter};
use parmor::reductors::bt;
use parmor::thermalblock::{verify_affine_consistency, OutputMode, ThermalBlockSpec};
use parmor::{CsrMatrix, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn ok(detail: String) -> Outcome {
    Outcome {
        passed: true,
        detail,
    }
}

fn fail(detail: String) -> Outcome {
    Outcome {
        passed: false,
        detail,
    }
}

fn gate(value: f64, tol: f64, what: &str) -> Outcome {
    let detail = format!("{what} {value:.3e} (tolerance {tol:.1e})");
    if value <= tol {
        ok(detail)
    } else {
        fail(detail)
    }
}

fn diag_model(eigs: &[f64], b: &[f64], c: &[f64]) -> Result<LtiModel> {
    let n = eigs.len();
    LtiModel::new(
        OpMatrix::Sparse(CsrMatrix::identity(n)),
        AffineOperator::constant(OpMatrix::Sparse(CsrMatrix::from_diagonal(eigs))),
        DMatrix::from_column_slice(n, 1, b),
        DMatrix::from_row_slice(1, n, c),
        InnerProduct::Identity,
    )
}

/// Dense Lyapunov solution against the Kronecker-vectorization oracle on a
/// seeded random stable pencil.
fn lyapunov_vs_kronecker() -> Result<Outcome> {
    let n = 8;
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    for i in 0..n {
        a[(i, i)] -= n as f64; // diagonally dominant, hence stable
    }
    let e = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.05..0.05));
    let b = DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0));

    let p = solve_lyapunov_dense(&a, &e, &b)?;
    // vec(A X E^T + E X A^T) = (E (x) A + A (x) E) vec(X)
    let m = e.kronecker(&a) + a.kronecker(&e);
    let rhs = -(&b * b.transpose());
    let rhs_vec = DMatrix::from_column_slice(n * n, 1, rhs.as_slice());
    let x_vec = m
        .lu()
        .solve(&rhs_vec)
        .ok_or_else(|| parmor::Error::invalid("Kronecker system is singular"))?;
    let x = DMatrix::from_column_slice(n, n, x_vec.as_slice());

    let gap = (&p - &x).amax() / x.amax();
    let res = lyapunov_residual(&a, &e, &b, &p);
    if gap > 1e-9 {
        return Ok(fail(format!("entrywise deviation {gap:.3e} > 1e-9")));
    }
    Ok(gate(res, 1e-10, "relative residual"))
}

/// Scalar Riccati truth `sqrt(2) - 1`, and the `C = 0` reduction to the
/// Lyapunov solution.
fn riccati_scalar() -> Result<Outcome> {
    let a = DMatrix::from_element(1, 1, -1.0);
    let e = DMatrix::identity(1, 1);
    let b = DMatrix::from_element(1, 1, 1.0);
    let c = DMatrix::from_element(1, 1, 1.0);
    let p = solve_riccati_dense(&a, &e, &b, &c)?;
    let dev = (p[(0, 0)] - (2f64.sqrt() - 1.0)).abs();
    if dev > 1e-10 {
        return Ok(fail(format!("sqrt(2)-1 missed by {dev:.3e}")));
    }
    let p0 = solve_riccati_dense(&a, &e, &b, &DMatrix::zeros(1, 1))?;
    let lyap = solve_lyapunov_dense(&a, &e, &b)?;
    Ok(gate(
        (p0[(0, 0)] - lyap[(0, 0)]).abs(),
        1e-12,
        "C = 0 deviation from the Lyapunov solution",
    ))
}

/// Analytic H2 norms: `sqrt(0.5)` for the scalar system and `sqrt(17/12)`
/// for the two-mode ladder.
fn h2_analytic() -> Result<Outcome> {
    let mu = Parameter::empty();
    let scalar = diag_model(&[-1.0], &[1.0], &[1.0])?;
    let v1 = h2_norm(&scalar, &mu, LyapunovMethod::Dense)?.value;
    let d1 = (v1 - 0.5f64.sqrt()).abs() / 0.5f64.sqrt();
    let ladder = diag_model(&[-1.0, -2.0], &[1.0, 1.0], &[1.0, 1.0])?;
    let v2 = h2_norm(&ladder, &mu, LyapunovMethod::Dense)?.value;
    let truth = (17f64 / 12.0).sqrt();
    let d2 = (v2 - truth).abs() / truth;
    Ok(gate(d1.max(d2), 1e-10, "worst relative deviation"))
}

/// Gramian trace against the impulse-response quadrature, plus agreement
/// of the controllability and observability sides.
fn h2_quadrature_and_sides() -> Result<Outcome> {
    let mu = Parameter::empty();
    let model = diag_model(&[-1.0, -2.0, -5.0], &[1.0, 0.5, 2.0], &[1.0, 1.0, -0.5])?;
    let trace = h2_norm(&model, &mu, LyapunovMethod::Dense)?.value;
    let quad = impulse_quadrature_oracle(&model, &mu, 40.0, 40_000)?;
    let d_quad = (trace - quad).abs() / trace;
    if d_quad > 1e-4 {
        return Ok(fail(format!("quadrature deviation {d_quad:.3e} > 1e-4")));
    }
    let obs = h2_norm_side(&model, &mu, LyapunovMethod::Dense, GramianSide::Observability)?.value;
    Ok(gate(
        (trace - obs).abs() / trace,
        1e-6,
        "controllability/observability gap",
    ))
}

/// Thermal-block affine assembly against the monolithic stencil.
fn thermal_affine() -> Result<Outcome> {
    let spec = ThermalBlockSpec::new(3, 7, OutputMode::BlockAverages)?;
    let mu = Parameter::new(vec![0.13, 2.4, 0.52, 9.7, 1.0, 0.061, 3.3, 0.8, 5.5])?;
    let dev = verify_affine_consistency(&spec, &mu)?;
    Ok(gate(dev, 1e-13, "entrywise deviation"))
}

/// Balanced truncation closed forms: the scalar Hankel value is 1/2 and
/// the two-mode bound equals twice the truncated value.
fn bt_closed_forms() -> Result<Outcome> {
    let mu = Parameter::empty();
    let scalar = diag_model(&[-1.0], &[1.0], &[1.0])?;
    let res = bt(&scalar, &mu, 1, LyapunovMethod::Dense)?;
    let d1 = (res.diagnostics.singular_values[0] - 0.5).abs();
    if d1 > 1e-12 {
        return Ok(fail(format!("scalar Hankel value missed by {d1:.3e}")));
    }
    let ladder = diag_model(&[-1.0, -2.0], &[1.0, 1.0], &[1.0, 1.0])?;
    let res = bt(&ladder, &mu, 1, LyapunovMethod::Dense)?;
    let d2 = (res.diagnostics.error_bound - 2.0 * res.diagnostics.singular_values[1]).abs();
    Ok(gate(d2, 1e-14, "tail-bound deviation"))
}

/// Runs every check, printing one line each; returns whether all passed.
pub fn run_selftest() -> Result<bool> {
    let checks: [(&str, fn() -> Result<Outcome>); 6] = [
        ("lyapunov-vs-kronecker", lyapunov_vs_kronecker),
        ("riccati-scalar", riccati_scalar),
        ("h2-analytic", h2_analytic),
        ("h2-quadrature-and-sides", h2_quadrature_and_sides),
        ("thermal-affine-assembly", thermal_affine),
        ("bt-closed-forms", bt_closed_forms),
    ];
    let mut all = true;
    for (name, run) in checks {
        let outcome = match run() {
            Ok(o) => o,
            Err(e) => fail(format!("errored: {e}")),
        };
        let verdict = if outcome.passed { "ok" } else { "FAIL" };
        println!("selftest {name:28} {verdict:4} {}", outcome.detail);
        all &= outcome.passed;
    }
    Ok(all)
}
