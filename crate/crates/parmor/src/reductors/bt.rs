//! Balanced truncation and its LQG variant, square-root method.

use crate::error::{Error, Result};
use crate::mateq::{gramian_factors, solve_riccati_dense, LowRankFactor, LyapunovMethod};
use crate::metrics::{bt_error_bound, hankel_svd};
use crate::model::{BasisPair, LtiModel, OpMatrix, Parameter};
use crate::reductors::ReductionResult;

/// Singular values this far below the largest count as numerically zero
/// for the balancing transformation.
const BALANCE_RANK_RTOL: f64 = 1e-14;

/// Balancing diagnostics: the full singular-value profile of the
/// Gramian coupling and the truncation bound derived from its tail.
#[derive(Debug, Clone)]
pub struct BtDiagnostics {
    /// Hankel singular values (Lyapunov balancing) or LQG characteristic
    /// values (Riccati balancing), descending.
    pub singular_values: Vec<f64>,
    /// Tail bound `2 * (s_{r+1} + ... + s_n)` at the realized order; a
    /// guaranteed Hinf bound for Lyapunov balancing.
    pub error_bound: f64,
    /// The order that was asked for.
    pub requested_order: usize,
    /// Set when the coupling rank forced a smaller order.
    pub note: Option<String>,
}

/// Square-root balancing step shared by [`bt`] and [`lqgbt`]: from factors
/// of the two Gramians, build the Petrov-Galerkin pair
/// `V = Z_P T_r S_r^{-1/2}`, `W = Z_Q U_r S_r^{-1/2}` out of the SVD
/// `Z_Q^T E Z_P = U S T^T`.
fn square_root_basis(
    zp: &LowRankFactor,
    zq: &LowRankFactor,
    e: &OpMatrix,
    r: usize,
) -> Result<(BasisPair, Vec<f64>, usize, Option<String>)> {
    let (u, svals, t) = hankel_svd(zq, e, zp)?;
    if svals.is_empty() || svals[0] <= 0.0 {
        return Err(Error::DegenerateGramian(
            "Gramian coupling is numerically zero; nothing controllable and observable",
        ));
    }
    let positive = svals
        .iter()
        .take_while(|&&s| s > BALANCE_RANK_RTOL * svals[0])
        .count();
    let r_eff = r.min(positive);
    let note = (r_eff < r).then(|| {
        format!(
            "coupling rank {positive} cut the requested order {r} to {r_eff}"
        )
    });
    let mut v = zp.matrix() * t.columns(0, r_eff);
    let mut w = zq.matrix() * u.columns(0, r_eff);
    for k in 0..r_eff {
        let scale = svals[k].sqrt().recip();
        v.column_mut(k).scale_mut(scale);
        w.column_mut(k).scale_mut(scale);
    }
    Ok((BasisPair::petrov_galerkin(v, w)?, svals, r_eff, note))
}

fn check_order(r: usize, n: usize) -> Result<()> {
    if r == 0 || r > n {
        Err(Error::invalid(format!(
            "reduced order {r} must lie in 1..={n}"
        )))
    } else {
        Ok(())
    }
}

/// Balanced truncation of `fom` frozen at `mu` to order `r`.
///
/// Solves the two Lyapunov equations with the chosen solver lane, balances
/// by the square-root method, and projects. The diagnostics carry every
/// Hankel singular value and the a-priori bound `2 * sum of the truncated
/// tail`. An order beyond the numerical rank of the coupling is lowered to
/// that rank with a note.
pub fn bt(
    fom: &LtiModel,
    mu: &Parameter,
    r: usize,
    method: LyapunovMethod,
) -> Result<ReductionResult<BtDiagnostics>> {
    check_order(r, fom.order())?;
    let (zp, zq) = bt_factors(fom, mu, method)?;
    bt_from_factors(fom, &zp, &zq, r)
}

/// The Gramian square-root factors of `fom` frozen at `mu`, as consumed by
/// [`bt_from_factors`].
///
/// Splitting the solve from the truncation lets an order sweep pay for the
/// matrix equations once: the factors depend on the parameter but not on
/// the reduced order.
pub fn bt_factors(
    fom: &LtiModel,
    mu: &Parameter,
    method: LyapunovMethod,
) -> Result<(LowRankFactor, LowRankFactor)> {
    let a = fom.eval_a(mu)?;
    gramian_factors(&a, fom.e(), fom.b(), fom.c(), method)
}

/// The Riccati square-root factors of `fom` frozen at `mu`, as consumed by
/// [`bt_from_factors`]; see [`lqgbt`] for the balancing they induce.
pub fn lqgbt_factors(
    fom: &LtiModel,
    mu: &Parameter,
) -> Result<(LowRankFactor, LowRankFactor)> {
    if fom.b().amax() == 0.0 {
        return Err(Error::DegenerateGramian(
            "zero input operator: the filter Riccati solution vanishes",
        ));
    }
    if fom.c().amax() == 0.0 {
        return Err(Error::DegenerateGramian(
            "zero output operator: the regulator Riccati solution vanishes",
        ));
    }
    let a = fom.eval_a(mu)?.to_dense();
    let e = fom.e().to_dense();
    let p = solve_riccati_dense(&a, &e, fom.b(), fom.c())?;
    let q = solve_riccati_dense(
        &a.transpose(),
        &e.transpose(),
        &fom.c().transpose(),
        &fom.b().transpose(),
    )?;
    Ok((LowRankFactor::from_gramian(&p)?, LowRankFactor::from_gramian(&q)?))
}

/// LQG balanced truncation of `fom` frozen at `mu` to order `r`.
///
/// Balances the stabilizing solutions of the filter and regulator Riccati
/// equations instead of the Gramians; always dense. The singular values in
/// the diagnostics are the LQG characteristic values. A zero input or
/// output operator makes the corresponding Riccati solution vanish and is
/// rejected as degenerate.
pub fn lqgbt(
    fom: &LtiModel,
    mu: &Parameter,
    r: usize,
) -> Result<ReductionResult<BtDiagnostics>> {
    check_order(r, fom.order())?;
    let (zp, zq) = lqgbt_factors(fom, mu)?;
    bt_from_factors(fom, &zp, &zq, r)
}

/// Balances and truncates to order `r` from precomputed square-root
/// factors (either lane of [`bt_factors`], or [`lqgbt_factors`]).
pub fn bt_from_factors(
    fom: &LtiModel,
    zp: &LowRankFactor,
    zq: &LowRankFactor,
    r: usize,
) -> Result<ReductionResult<BtDiagnostics>> {
    check_order(r, fom.order())?;
    let (basis, singular_values, r_eff, note) = square_root_basis(zp, zq, fom.e(), r)?;
    let rom = fom.project(&basis)?;
    Ok(ReductionResult {
        rom,
        basis,
        diagnostics: BtDiagnostics {
            error_bound: bt_error_bound(&singular_values, r_eff),
            singular_values,
            requested_order: r,
            note,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::InnerProduct;
    use crate::mateq::AdiOptions;
    use crate::model::AffineOperator;
    use crate::sparse::CsrMatrix;
    use crate::thermalblock::{build, OutputMode, ThermalBlockSpec};
    use approx::assert_relative_eq;
    use nalgebra::{Complex, DMatrix};

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

    fn diag2_model() -> LtiModel {
        LtiModel::new(
            OpMatrix::Sparse(CsrMatrix::identity(2)),
            AffineOperator::constant(OpMatrix::Sparse(CsrMatrix::from_diagonal(&[-1.0, -2.0]))),
            DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            InnerProduct::Identity,
        )
        .unwrap()
    }

    fn transfer_gap_on_axis(fom: &LtiModel, rom: &LtiModel, mu: &Parameter, mu_r: &Parameter) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..10 {
            let w = 10f64.powf(-2.0 + 4.0 * k as f64 / 9.0);
            let s = Complex::new(0.0, w);
            let d = (fom.transfer(mu, s).unwrap() - rom.transfer(mu_r, s).unwrap()).norm();
            worst = worst.max(d);
        }
        worst
    }

    #[test]
    fn scalar_hankel_value_is_half() {
        let m = scalar_model();
        let result = bt(&m, &Parameter::empty(), 1, LyapunovMethod::Dense).unwrap();
        assert_eq!(result.diagnostics.singular_values.len(), 1);
        assert_relative_eq!(result.diagnostics.singular_values[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(result.diagnostics.error_bound, 0.0, epsilon = 1e-15);
        // full order: the reduced model is a realization of the same
        // transfer function
        let gap = transfer_gap_on_axis(&m, &result.rom, &Parameter::empty(), &Parameter::empty());
        assert!(gap < 1e-10);
    }

    #[test]
    fn full_order_bt_reproduces_transfer() {
        let fom = diag2_model();
        let result = bt(&fom, &Parameter::empty(), 2, LyapunovMethod::Dense).unwrap();
        let gap = transfer_gap_on_axis(&fom, &result.rom, &Parameter::empty(), &Parameter::empty());
        assert!(gap < 1e-8, "transfer gap {gap:.3e}");
    }

    #[test]
    fn truncated_bt_respects_hinf_bound() {
        let fom = diag2_model();
        let result = bt(&fom, &Parameter::empty(), 1, LyapunovMethod::Dense).unwrap();
        assert_eq!(result.order(), 1);
        let bound = result.diagnostics.error_bound;
        assert_relative_eq!(
            bound,
            2.0 * result.diagnostics.singular_values[1],
            epsilon = 1e-14
        );
        let gap = transfer_gap_on_axis(&fom, &result.rom, &Parameter::empty(), &Parameter::empty());
        assert!(
            gap <= bound * (1.0 + 1e-10),
            "sampled error {gap:.3e} exceeds bound {bound:.3e}"
        );
    }

    #[test]
    fn thermal_block_bt_dense_and_lowrank_agree() {
        let spec = ThermalBlockSpec::new(2, 6, OutputMode::BlockAverages).unwrap();
        let fom = build(&spec).unwrap();
        let mu = Parameter::new(vec![1.0, 3.0, 0.5, 1.5]).unwrap();
        let dense = bt(&fom, &mu, 6, LyapunovMethod::Dense).unwrap();
        let lowrank = bt(
            &fom,
            &mu,
            6,
            LyapunovMethod::LowRank(AdiOptions {
                res_tol: 1e-12,
                ..AdiOptions::default()
            }),
        )
        .unwrap();
        // same Hankel profile from both solver lanes, down to where the
        // ADI stopping tolerance starts to dominate the tiny values
        for (a, b) in dense
            .diagnostics
            .singular_values
            .iter()
            .zip(&lowrank.diagnostics.singular_values)
        {
            if *a > 1e-6 * dense.diagnostics.singular_values[0] {
                assert_relative_eq!(a, b, max_relative = 1e-6);
            }
        }
        // and matching reduced transfer functions
        let gap = transfer_gap_on_axis(&dense.rom, &lowrank.rom, &mu, &mu);
        let scale = fom.transfer(&mu, Complex::new(0.0, 1.0)).unwrap().norm();
        assert!(gap < 1e-8 * scale.max(1.0), "lane mismatch {gap:.3e}");
    }

    #[test]
    fn rank_shortfall_reduces_order_with_note() {
        // order 3 but rank-1 input and output: only one state is both
        // controllable and observable
        let m = LtiModel::new(
            OpMatrix::Sparse(CsrMatrix::identity(3)),
            AffineOperator::constant(OpMatrix::Sparse(CsrMatrix::from_diagonal(&[
                -1.0, -2.0, -3.0,
            ]))),
            DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            InnerProduct::Identity,
        )
        .unwrap();
        let result = bt(&m, &Parameter::empty(), 3, LyapunovMethod::Dense).unwrap();
        assert_eq!(result.order(), 1);
        assert!(result.diagnostics.note.is_some());
        assert_eq!(result.diagnostics.requested_order, 3);
    }

    #[test]
    fn bt_preserves_stability_on_thermal_block() {
        let spec = ThermalBlockSpec::new(2, 5, OutputMode::DomainAverage).unwrap();
        let fom = build(&spec).unwrap();
        let mu = Parameter::new(vec![10.0, 0.1, 1.0, 2.0]).unwrap();
        for r in [2, 4, 8] {
            let result = bt(&fom, &mu, r, LyapunovMethod::Dense).unwrap();
            for pole in result.rom.poles(&mu).unwrap() {
                assert!(pole.re < 0.0, "pole {pole} in the right half-plane at r={r}");
            }
        }
    }

    #[test]
    fn scalar_lqg_characteristic_value() {
        let m = scalar_model();
        let result = lqgbt(&m, &Parameter::empty(), 1).unwrap();
        // scalar Riccati solution sqrt(2) - 1 on both sides
        assert_relative_eq!(
            result.diagnostics.singular_values[0],
            2f64.sqrt() - 1.0,
            epsilon = 1e-9
        );
        let gap = transfer_gap_on_axis(&m, &result.rom, &Parameter::empty(), &Parameter::empty());
        assert!(gap < 1e-8);
    }

    #[test]
    fn full_order_lqgbt_reproduces_transfer() {
        let fom = diag2_model();
        let result = lqgbt(&fom, &Parameter::empty(), 2).unwrap();
        let gap = transfer_gap_on_axis(&fom, &result.rom, &Parameter::empty(), &Parameter::empty());
        assert!(gap < 1e-8, "transfer gap {gap:.3e}");
    }

    #[test]
    fn lqgbt_rejects_zero_output() {
        let m = LtiModel::new(
            OpMatrix::Sparse(CsrMatrix::identity(2)),
            AffineOperator::constant(OpMatrix::Sparse(CsrMatrix::from_diagonal(&[-1.0, -2.0]))),
            DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            DMatrix::zeros(1, 2),
            InnerProduct::Identity,
        )
        .unwrap();
        match lqgbt(&m, &Parameter::empty(), 1) {
            Err(Error::DegenerateGramian(_)) => {}
            other => panic!("expected degenerate-Gramian error, got {other:?}"),
        }
    }

    #[test]
    fn factor_sweep_matches_per_order_calls() {
        let spec = ThermalBlockSpec::new(2, 5, OutputMode::DomainAverage).unwrap();
        let fom = build(&spec).unwrap();
        let mu = Parameter::new(vec![2.0, 0.5, 1.0, 1.0]).unwrap();
        let (zp, zq) = bt_factors(&fom, &mu, LyapunovMethod::Dense).unwrap();
        for r in [1, 3, 7] {
            let swept = bt_from_factors(&fom, &zp, &zq, r).unwrap();
            let direct = bt(&fom, &mu, r, LyapunovMethod::Dense).unwrap();
            let gap = transfer_gap_on_axis(&swept.rom, &direct.rom, &mu, &mu);
            assert!(gap < 1e-10, "sweep/direct mismatch {gap:.3e} at r={r}");
            assert_relative_eq!(
                swept.diagnostics.error_bound,
                direct.diagnostics.error_bound,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn out_of_range_orders_are_rejected() {
        let m = diag2_model();
        assert!(bt(&m, &Parameter::empty(), 0, LyapunovMethod::Dense).is_err());
        assert!(bt(&m, &Parameter::empty(), 3, LyapunovMethod::Dense).is_err());
    }
}
