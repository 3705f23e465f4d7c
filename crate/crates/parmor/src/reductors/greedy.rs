//! Weak POD-greedy basis generation over a parameter training set.
//!
//! Each round scores every training parameter against the current reduced
//! model, simulates the full model only at the worst one, and feeds the part
//! of that trajectory not yet captured by the basis through a POD
//! compression step. Scoring is either the exact state error (the
//! reference, affordable at the scales this crate targets) or a residual
//! surrogate that never touches the full solver: the reduced trajectory is
//! inserted into the full implicit-Euler equation and the energy norms of
//! the defects are summed, divided by the parameter's coercivity lower
//! bound `min_i mu_i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, pod_modes};
#[cfg(test)]
use crate::linalg::InnerProduct;
use crate::model::{BasisPair, InputSignal, LtiModel, Parameter};
use crate::reductors::ReductionResult;

/// Columns this close to the span of the existing basis are discarded when
/// the enriched basis is re-orthonormalized.
const GREEDY_DROP_TOL: f64 = 1e-10;

/// How the greedy loop scores a training parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorEstimator {
    /// Exact accumulated state error against a full-order simulation.
    TrueError,
    /// Implicit-Euler residual of the reduced trajectory, scaled by the
    /// coercivity bound; requires strictly positive parameter values.
    Residual,
}

/// Verbatim record of a greedy run, one entry per event.
#[derive(Debug, Clone)]
pub struct GreedyTrace {
    /// Worst parameter of each enrichment round: training-set index and
    /// the parameter itself.
    pub selected: Vec<(usize, Parameter)>,
    /// Largest estimate seen in each scoring sweep, including the final
    /// sweep that triggered the stop.
    pub max_errors: Vec<f64>,
    /// Basis size after each enrichment.
    pub basis_sizes: Vec<usize>,
    /// True when the loop stopped because the estimate dropped below the
    /// target (rather than by exhausting `max_basis` or the snapshots).
    pub converged: bool,
}

/// Sum over time steps of squared energy norms of the state error, with
/// the reduced trajectory lifted through `v`. Uses `V^T M V = I`:
/// `|x - V xh|^2 = |x|^2 - 2 xh . (V^T M x) + |xh|^2`.
fn true_error_sq(
    v: &DMatrix<f64>,
    vmx: &DMatrix<f64>,
    energy: f64,
    rom: &LtiModel,
    mu: &Parameter,
    input: &InputSignal,
    t_final: f64,
    steps: usize,
) -> Result<f64> {
    if v.ncols() == 0 {
        return Ok(energy);
    }
    let traj = rom.simulate(mu, input, t_final, steps)?;
    let xh = traj.states.columns(1, steps);
    let cross = xh.component_mul(vmx).sum();
    Ok((energy - 2.0 * cross + xh.norm_squared()).max(0.0))
}

/// Residual surrogate: energy norms of the implicit-Euler defect of the
/// lifted reduced trajectory, summed over steps and divided by the
/// coercivity bound of `mu`.
fn residual_estimate(
    fom: &LtiModel,
    rom: &LtiModel,
    v: &DMatrix<f64>,
    b_sum: &DVector<f64>,
    mu: &Parameter,
    input: &InputSignal,
    t_final: f64,
    steps: usize,
) -> Result<f64> {
    let coercivity = coercivity_bound(mu)?;
    let traj = rom.simulate(mu, input, t_final, steps)?;
    let lifted = v * &traj.states;
    let a_mu = fom.eval_a(mu)?;
    let ey = fom.e().mul_dense(&lifted);
    let ay = a_mu.mul_dense(&lifted);
    let dt = t_final / steps as f64;
    let m = fom.energy_product();
    let mut sum = 0.0;
    for k in 1..=steps {
        let u = input.value_at(k);
        let mut res: DVector<f64> = ey.column(k) - ey.column(k - 1);
        res.axpy(-dt, &ay.column(k).clone_owned(), 1.0);
        res.axpy(-dt * u, b_sum, 1.0);
        sum += m.norm(&res);
    }
    Ok(sum / coercivity)
}

fn coercivity_bound(mu: &Parameter) -> Result<f64> {
    let min = mu.values().iter().copied().fold(f64::INFINITY, f64::min);
    if min.is_finite() && min > 0.0 {
        Ok(min)
    } else {
        Err(Error::CoercivityBound(format!(
            "residual estimator needs strictly positive parameter values, got minimum {min}"
        )))
    }
}

/// Weak POD-greedy reduction over `training_set`.
///
/// Per round: score every training parameter against the current reduced
/// model with `estimator`, pick the argmax (ties broken toward the lowest
/// index), simulate the full model there, project the snapshots onto the
/// energy-orthogonal complement of the basis, append the first
/// `modes_per_iter` POD modes of the remainder, and re-orthonormalize.
/// Stops when the largest estimate falls to `target`, the basis reaches
/// `max_basis`, or the worst trajectory carries nothing new.
#[allow(clippy::too_many_arguments)]
pub fn pod_greedy(
    fom: &LtiModel,
    training_set: &[Parameter],
    input: &InputSignal,
    t_final: f64,
    steps: usize,
    modes_per_iter: usize,
    max_basis: usize,
    target: f64,
    estimator: ErrorEstimator,
) -> Result<ReductionResult<GreedyTrace>> {
    if training_set.is_empty() {
        return Err(Error::invalid("greedy training set must not be empty"));
    }
    if modes_per_iter == 0 || max_basis == 0 {
        return Err(Error::invalid(
            "greedy needs modes_per_iter >= 1 and max_basis >= 1",
        ));
    }
    if target.is_nan() {
        return Err(Error::invalid("greedy target must not be NaN"));
    }
    if estimator == ErrorEstimator::Residual {
        for mu in training_set {
            coercivity_bound(mu)?;
        }
    }
    let n = fom.order();
    let m = fom.energy_product();

    // the exact estimator compares against full snapshots at every
    // parameter, so those are simulated once up front; M X and the
    // snapshot energies are cached alongside
    struct Cached {
        x: DMatrix<f64>,
        mx: DMatrix<f64>,
        energy: f64,
    }
    let cache: Option<Vec<Cached>> = match estimator {
        ErrorEstimator::TrueError => Some(
            training_set
                .iter()
                .map(|mu| {
                    let traj = fom.simulate(mu, input, t_final, steps)?;
                    let x = traj.states.columns(1, steps).clone_owned();
                    let mx = m.apply_mat(&x);
                    let energy = x.component_mul(&mx).sum();
                    Ok(Cached { x, mx, energy })
                })
                .collect::<Result<_>>()?,
        ),
        ErrorEstimator::Residual => None,
    };
    let b_sum: DVector<f64> = {
        let mut s = DVector::zeros(n);
        for j in 0..fom.b().ncols() {
            s += fom.b().column(j);
        }
        s
    };

    let mut v = DMatrix::<f64>::zeros(n, 0);
    let mut trace = GreedyTrace {
        selected: vec![],
        max_errors: vec![],
        basis_sizes: vec![],
        converged: false,
    };
    loop {
        if v.ncols() >= max_basis {
            break;
        }
        let rom = fom.project(&BasisPair::galerkin(v.clone()))?;
        let mut best_idx = 0usize;
        let mut best = f64::NEG_INFINITY;
        for (j, mu) in training_set.iter().enumerate() {
            let est = match (&estimator, &cache) {
                (ErrorEstimator::TrueError, Some(c)) => {
                    let vmx = v.transpose() * &c[j].mx;
                    true_error_sq(&v, &vmx, c[j].energy, &rom, mu, input, t_final, steps)?
                }
                _ => residual_estimate(fom, &rom, &v, &b_sum, mu, input, t_final, steps)?,
            };
            if est > best {
                best = est;
                best_idx = j;
            }
        }
        trace.max_errors.push(best);
        if best <= target {
            trace.converged = true;
            break;
        }
        trace
            .selected
            .push((best_idx, training_set[best_idx].clone()));

        let x = match &cache {
            Some(c) => c[best_idx].x.clone(),
            None => {
                let traj = fom.simulate(&training_set[best_idx], input, t_final, steps)?;
                traj.states.columns(1, steps).clone_owned()
            }
        };
        let x_perp = if v.ncols() == 0 {
            x
        } else {
            // subtract V (V^T M X), twice: the snapshot components along
            // the basis dwarf the remainder once the method starts to
            // converge, and a single pass would leave round-off of the
            // dominant part polluting the modes extracted from the rest
            let mut xp = x;
            for _ in 0..2 {
                let coeff = v.transpose() * m.apply_mat(&xp);
                xp -= &v * coeff;
            }
            xp
        };
        let (modes, _) = pod_modes(&x_perp, m, 0.0, modes_per_iter)?;
        if modes.ncols() == 0 {
            // the worst trajectory is already captured to round-off; no
            // direction left to add, so stop rather than spin
            break;
        }
        let mut combined = DMatrix::zeros(n, v.ncols() + modes.ncols());
        combined.columns_mut(0, v.ncols()).copy_from(&v);
        combined
            .columns_mut(v.ncols(), modes.ncols())
            .copy_from(&modes);
        v = orthonormalize(&combined, m, GREEDY_DROP_TOL)?;
        trace.basis_sizes.push(v.ncols());
    }

    let basis = BasisPair::galerkin(v);
    let rom = fom.project(&basis)?;
    Ok(ReductionResult {
        rom,
        basis,
        diagnostics: trace,
    })
}

/// Largest principal-angle deviation between the spans of two
/// `M`-orthonormal bases of equal width; 0 means identical spans.
#[cfg(test)]
fn span_gap(v1: &DMatrix<f64>, v2: &DMatrix<f64>, m: &InnerProduct) -> f64 {
    assert_eq!(v1.ncols(), v2.ncols());
    let overlap = v1.transpose() * m.apply_mat(v2);
    let sv = overlap.svd(false, false).singular_values;
    sv.iter().map(|s| (1.0 - s).abs()).fold(0.0, f64::max)
}
