//! Model reduction methods.
//!
//! Each reductor takes a full-order model (with a parameter point where one
//! is needed), produces a projection [`BasisPair`], and returns the projected
//! reduced model together with method-specific diagnostics:
//!
//! * [`pod_reduce`] — proper orthogonal decomposition of one simulated
//!   trajectory, Galerkin.
//! * [`pod_greedy`] — weak greedy loop over a parameter training set with a
//!   POD compression step per iteration.
//! * [`bt`] / [`lqgbt`] — balanced truncation from Lyapunov or Riccati
//!   solutions, Petrov-Galerkin, square-root method.
//! * [`irka`] / [`os_irka`] — (one-sided) iterative rational Krylov,
//!   fixed-point iteration on tangential interpolation data.
//! * [`global_basis`] — combines local bases built at training parameters
//!   into one global Galerkin basis for the parametric model.
//!
//! The reduced model is always exactly `fom.project(&basis)`, so every
//! result can be re-verified against its own basis.

pub mod bt;
pub mod global;
pub mod greedy;
pub mod irka;
pub mod pod;

pub use bt::{bt, bt_factors, bt_from_factors, lqgbt, lqgbt_factors, BtDiagnostics};
pub use global::global_basis;
pub use greedy::{pod_greedy, ErrorEstimator, GreedyTrace};
pub use irka::{irka, os_irka, IrkaDiagnostics, IrkaInit, IrkaState};
pub use pod::{pod_reduce, PodDiagnostics};

use crate::model::{BasisPair, LtiModel};

/// A reduced-order model, the projection basis that produced it, and what
/// the method has to report about the run.
#[derive(Debug, Clone)]
pub struct ReductionResult<D> {
    pub rom: LtiModel,
    pub basis: BasisPair,
    pub diagnostics: D,
}

impl<D> ReductionResult<D> {
    /// Order of the reduced model.
    pub fn order(&self) -> usize {
        self.rom.order()
    }
}
