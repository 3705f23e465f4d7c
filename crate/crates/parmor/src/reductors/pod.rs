//! Proper orthogonal decomposition of a simulated trajectory.

use crate::error::{Error, Result};
use crate::linalg::pod_modes;
use crate::model::{BasisPair, InputSignal, LtiModel, Parameter};
use crate::reductors::ReductionResult;

/// What a POD run found: the full singular-value profile of the snapshot
/// matrix and how much of it went into the basis.
#[derive(Debug, Clone)]
pub struct PodDiagnostics {
    /// All POD singular values of the snapshot matrix, descending.
    pub singular_values: Vec<f64>,
    /// The order that was asked for.
    pub requested_order: usize,
    /// Set when the snapshot rank cut the basis short of `requested_order`.
    pub note: Option<String>,
}

/// Simulates the model at `mu`, extracts the dominant POD modes of the
/// state snapshots in the energy inner product, and Galerkin-projects.
///
/// The trajectory starts from `x(0) = 0`; that all-zero leading snapshot is
/// dropped before compression. When the snapshots have rank below `r` the
/// basis is truncated to the available rank and the diagnostics say so.
pub fn pod_reduce(
    fom: &LtiModel,
    mu: &Parameter,
    input: &InputSignal,
    t_final: f64,
    steps: usize,
    r: usize,
) -> Result<ReductionResult<PodDiagnostics>> {
    if r == 0 {
        return Err(Error::invalid("POD order must be at least 1"));
    }
    let traj = fom.simulate(mu, input, t_final, steps)?;
    let x = traj.states.columns(1, steps).clone_owned();
    let (modes, singular_values) = pod_modes(&x, fom.energy_product(), 0.0, r)?;
    if modes.ncols() == 0 {
        return Err(Error::EmptyBasis(
            "snapshot matrix has no energy; POD basis is empty (zero input?)".into(),
        ));
    }
    let note = (modes.ncols() < r).then(|| {
        format!(
            "snapshot rank {} is below the requested order {r}",
            modes.ncols()
        )
    });
    let basis = BasisPair::galerkin(modes);
    let rom = fom.project(&basis)?;
    Ok(ReductionResult {
        rom,
        basis,
        diagnostics: PodDiagnostics {
            singular_values,
            requested_order: r,
            note,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermalblock::{build, OutputMode, ThermalBlockSpec};

    fn small_fom() -> LtiModel {
        let spec = ThermalBlockSpec::new(2, 4, OutputMode::DomainAverage).unwrap();
        build(&spec).unwrap()
    }

    #[test]
    fn full_rank_pod_reproduces_snapshot_outputs() {
        let fom = small_fom();
        let mu = Parameter::new(vec![1.0, 2.0, 0.5, 1.5]).unwrap();
        let input = InputSignal::Step(1.0);
        let (t_final, steps) = (1.0, 20);
        let full = pod_reduce(&fom, &mu, &input, t_final, steps, steps).unwrap();
        // snapshot span is contained in the basis, so the Galerkin model
        // must retrace the training trajectory
        let y_fom = fom.simulate(&mu, &input, t_final, steps).unwrap().outputs;
        let y_rom = full
            .rom
            .simulate(&mu, &input, t_final, steps)
            .unwrap()
            .outputs;
        let scale = y_fom.amax();
        assert!(
            (&y_fom - &y_rom).amax() <= 1e-8 * scale,
            "output mismatch {:.3e} at scale {scale:.3e}",
            (&y_fom - &y_rom).amax()
        );
    }

    #[test]
    fn zero_input_yields_empty_basis_error() {
        let fom = small_fom();
        let mu = Parameter::new(vec![1.0; 4]).unwrap();
        match pod_reduce(&fom, &mu, &InputSignal::Zero, 1.0, 10, 3) {
            Err(Error::EmptyBasis(_)) => {}
            other => panic!("expected empty-basis error, got {other:?}"),
        }
    }

    #[test]
    fn rank_shortfall_is_noted() {
        let fom = small_fom();
        let mu = Parameter::new(vec![1.0; 4]).unwrap();
        // 5 snapshots can carry at most rank 5
        let result = pod_reduce(&fom, &mu, &InputSignal::Step(1.0), 1.0, 5, 12).unwrap();
        assert!(result.order() <= 5);
        assert!(result.diagnostics.note.is_some());
        assert_eq!(result.diagnostics.requested_order, 12);
    }

    #[test]
    fn nested_orders_do_not_increase_h2_error() {
        let fom = small_fom();
        let mu = Parameter::new(vec![1.0, 3.0, 0.4, 1.2]).unwrap();
        let input = InputSignal::Step(1.0);
        let ctx = crate::metrics::H2ErrorContext::new(&fom, &mu).unwrap();
        let mut last = f64::INFINITY;
        for r in [2, 4, 8] {
            let red = pod_reduce(&fom, &mu, &input, 1.0, 40, r).unwrap();
            let err = ctx.error(&red.rom).unwrap().value;
            assert!(
                err <= last + 1e-10,
                "error grew from {last:.3e} to {err:.3e} at order {r}"
            );
            last = err;
        }
    }

    #[test]
    fn projection_is_reverifiable() {
        let fom = small_fom();
        let mu = Parameter::new(vec![1.0, 2.0, 0.5, 1.5]).unwrap();
        let red = pod_reduce(&fom, &mu, &InputSignal::Step(1.0), 1.0, 15, 6).unwrap();
        let again = fom.project(&red.basis).unwrap();
        assert!(
            (red.rom.eval_a(&mu).unwrap().to_dense() - again.eval_a(&mu).unwrap().to_dense())
                .amax()
                < 1e-12
        );
        assert!((red.rom.b() - again.b()).amax() < 1e-12);
    }

    #[test]
    fn zero_order_is_rejected() {
        let fom = small_fom();
        let mu = Parameter::new(vec![1.0; 4]).unwrap();
        assert!(pod_reduce(&fom, &mu, &InputSignal::Step(1.0), 1.0, 10, 0).is_err());
    }
}
