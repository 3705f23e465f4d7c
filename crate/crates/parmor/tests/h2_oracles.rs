//! Quadrature oracles for the H2 machinery.
//!
//! The Gramian identity `|H|^2 = tr(C P C^T)` is checked against two
//! formulations that share no code with the Lyapunov solvers:
//!
//! - time domain: `|H|^2 = int_0^inf |h(t)|_F^2 dt` with the impulse
//!   response `h(t) = C exp(t E^-1 A) E^-1 B`, integrated by trapezoid on
//!   diagonal systems where the propagator is elementwise `exp`;
//! - frequency domain: `|H|^2 = (1/pi) int_0^inf |H(i w)|_F^2 dw`,
//!   mapped to a finite interval by `w = tan(theta)` and integrated by
//!   Simpson's rule, with each sample a shifted sparse solve.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Complex, DMatrix};

use parmor::linalg::InnerProduct;
use parmor::mateq::{AdiOptions, LyapunovMethod};
use parmor::metrics::{h2_error, h2_norm};
use parmor::model::{AffineOperator, BasisPair, LtiModel, OpMatrix, Parameter};
use parmor::sparse::CsrMatrix;
use parmor::thermalblock::{self, OutputMode, ThermalBlockSpec};

fn diagonal_model(eigs: &[f64], b: &[f64], c: &[f64]) -> LtiModel {
    let n = eigs.len();
    LtiModel::new(
        OpMatrix::Sparse(CsrMatrix::identity(n)),
        AffineOperator::new(OpMatrix::Sparse(CsrMatrix::from_diagonal(eigs)), vec![]).unwrap(),
        DMatrix::from_column_slice(n, 1, b),
        DMatrix::from_row_slice(1, n, c),
        InnerProduct::Identity,
    )
    .unwrap()
}

/// Trapezoid on `|h(t)|^2` for a diagonal system, where the propagator is
/// exact: `h(t) = sum_i c_i b_i exp(eig_i t)` per output/input pair.
fn impulse_quadrature_diagonal(eigs: &[f64], b: &[f64], c: &[f64], dt: f64, t_end: f64) -> f64 {
    let steps = (t_end / dt).round() as usize;
    let h_sq = |t: f64| -> f64 {
        let h: f64 = eigs
            .iter()
            .zip(b.iter().zip(c))
            .map(|(l, (bi, ci))| ci * bi * (l * t).exp())
            .sum();
        h * h
    };
    let mut acc = 0.5 * (h_sq(0.0) + h_sq(t_end));
    for k in 1..steps {
        acc += h_sq(k as f64 * dt);
    }
    acc * dt
}

/// Simpson's rule for `(1/pi) int_0^inf |H(i w)|_F^2 dw` after the
/// substitution `w = tan(theta)`; `limit` is the (finite) integrand value
/// at `theta = pi/2`, i.e. `lim w^2 |H(i w)|_F^2`.
fn frequency_quadrature(
    mut eval: impl FnMut(f64) -> f64,
    limit: f64,
    intervals: usize,
) -> f64 {
    assert!(intervals % 2 == 0);
    let h = FRAC_PI_2 / intervals as f64;
    let mut g = |k: usize| -> f64 {
        if k == intervals {
            limit
        } else {
            let theta = k as f64 * h;
            let w = theta.tan();
            eval(w) * (1.0 + w * w)
        }
    };
    let mut acc = g(0) + g(intervals);
    for k in 1..intervals {
        acc += g(k) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0 / PI
}

/// `lim w^2 |H(i w)|_F^2 = |C E^-1 B|_F^2`.
fn roll_off_limit(model: &LtiModel) -> DMatrix<f64> {
    let eb = model
        .e()
        .to_dense()
        .lu()
        .solve(model.b())
        .expect("descriptor is invertible");
    model.c() * eb
}

#[test]
fn impulse_quadrature_confirms_scalar_norm() {
    let m = diagonal_model(&[-1.0], &[1.0], &[1.0]);
    let gramian = h2_norm(&m, &Parameter::empty(), LyapunovMethod::Dense).unwrap().value;
    let quad = impulse_quadrature_diagonal(&[-1.0], &[1.0], &[1.0], 1e-4, 25.0).sqrt();
    assert!(
        (gramian - quad).abs() < 1e-7,
        "gramian {gramian} vs quadrature {quad}"
    );
    assert!((gramian - 0.5f64.sqrt()).abs() < 1e-13);
}

#[test]
fn impulse_quadrature_confirms_diagonal_norm() {
    let eigs = [-1.0, -2.0];
    let b = [1.0, 1.0];
    let c = [1.0, 1.0];
    let m = diagonal_model(&eigs, &b, &c);
    let gramian = h2_norm(&m, &Parameter::empty(), LyapunovMethod::Dense).unwrap().value;
    let quad = impulse_quadrature_diagonal(&eigs, &b, &c, 1e-4, 25.0).sqrt();
    assert!(
        (gramian - quad).abs() < 1e-7,
        "gramian {gramian} vs quadrature {quad}"
    );
    assert!((gramian - (17.0f64 / 12.0).sqrt()).abs() < 1e-13);
}

#[test]
fn frequency_quadrature_confirms_thermal_block_norms() {
    let spec = ThermalBlockSpec::new(2, 4, OutputMode::BlockAverages).unwrap();
    let fom = thermalblock::build(&spec).unwrap();
    let mu = Parameter::new(vec![1.0, 2.0, 0.5, 1.3]).unwrap();

    let dense = h2_norm(&fom, &mu, LyapunovMethod::Dense).unwrap().value;
    let lowrank = h2_norm(&fom, &mu, LyapunovMethod::LowRank(AdiOptions::default())).unwrap().value;
    let quad = frequency_quadrature(
        |w| {
            fom.transfer(&mu, Complex::new(0.0, w))
                .unwrap()
                .norm()
                .powi(2)
        },
        roll_off_limit(&fom).norm().powi(2),
        20_000,
    )
    .sqrt();

    assert!(
        (dense - lowrank).abs() < 1e-8 * dense,
        "dense {dense} vs low-rank {lowrank}"
    );
    assert!(
        (dense - quad).abs() < 1e-7 * dense,
        "gramian {dense} vs quadrature {quad}"
    );
}

#[test]
fn frequency_quadrature_confirms_h2_error() {
    let spec = ThermalBlockSpec::new(2, 4, OutputMode::DomainAverage).unwrap();
    let fom = thermalblock::build(&spec).unwrap();
    let mu = Parameter::new(vec![1.0, 2.0, 0.5, 1.3]).unwrap();
    let raw = DMatrix::from_fn(fom.order(), 4, |i, j| ((i * (j + 2) + 1) as f64).sin());
    let v = parmor::linalg::orthonormalize(&raw, fom.energy_product(), 1e-10).unwrap();
    let rom = fom.project(&BasisPair::galerkin(v)).unwrap();

    let structured = h2_error(&fom, &rom, &mu, LyapunovMethod::Dense).unwrap().value;
    let lowrank = h2_error(
        &fom,
        &rom,
        &mu,
        LyapunovMethod::LowRank(AdiOptions::default()),
    )
    .unwrap()
    .value;

    let limit = (roll_off_limit(&fom) - roll_off_limit(&rom)).norm().powi(2);
    let quad = frequency_quadrature(
        |w| {
            let s = Complex::new(0.0, w);
            let d = fom.transfer(&mu, s).unwrap() - rom.transfer(&mu, s).unwrap();
            d.norm().powi(2)
        },
        limit,
        20_000,
    )
    .sqrt();

    assert!(
        (structured - quad).abs() < 1e-6 * quad,
        "structured {structured} vs quadrature {quad}"
    );
    assert!(
        (structured - lowrank).abs() < 1e-7 * structured,
        "structured {structured} vs low-rank error-system {lowrank}"
    );
}
