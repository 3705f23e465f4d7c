//! Crate-wide error type.
//!
//! All fallible operations return [`Result`]. Variants are grouped loosely by
//! the stage at which they arise: input validation, linear-algebra kernels,
//! matrix-equation solvers, and reduction drivers. The guiding rule is that a
//! caller should be able to distinguish "you passed something malformed"
//! (programming error) from "the computation is mathematically impossible on
//! this input" (e.g. an unstable system handed to a Lyapunov solver) without
//! string-matching on messages.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: non-finite entries, empty data where content is
    /// required, out-of-range tolerances, and similar caller mistakes.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two operands whose shapes must agree do not.
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    DimensionMismatch {
        context: &'static str,
        left: String,
        right: String,
    },

    /// A matrix that must be invertible was found singular during
    /// factorization (e.g. the descriptor E, or a shifted operator).
    #[error("singular matrix encountered in {0}")]
    Singular(&'static str),

    /// A generalized eigenvalue problem has a singular pencil (some
    /// eigenvalue is infinite or undefined).
    #[error("singular pencil: {0}")]
    SingularPencil(String),

    /// A dense algorithm was asked to run above its size limit.
    #[error("problem size {size} exceeds the dense-path limit {limit} in {context}")]
    UnsupportedSize {
        context: &'static str,
        size: usize,
        limit: usize,
    },

    /// A solver that requires an asymptotically stable system detected an
    /// eigenvalue with non-negative real part (or a residual consistent with
    /// instability).
    #[error("unstable system in {context}: {detail}")]
    Unstable { context: &'static str, detail: String },

    /// A projection produced a singular reduced descriptor; the basis does
    /// not yield a well-posed reduced model.
    #[error("degenerate projection: reduced descriptor is singular (order {order})")]
    DegenerateProjection { order: usize },

    /// A balancing-type method found an identically zero Gramian, so no
    /// meaningful truncation exists.
    #[error("degenerate Gramian in {0}: largest characteristic value is zero")]
    DegenerateGramian(&'static str),

    /// Snapshot-based basis construction produced nothing to work with.
    #[error("empty basis: {0}")]
    EmptyBasis(String),

    /// The residual-based error surrogate needs a positive coercivity bound,
    /// which requires strictly positive parameter components.
    #[error("coercivity bound unavailable: {0}")]
    CoercivityBound(String),

    /// Newton's method for the Riccati equation failed to converge.
    #[error("Newton iteration diverged after {iterations} steps (last residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    /// A fixed-point iteration hit its iteration cap without meeting its
    /// tolerance, in a context where partial results are not acceptable.
    #[error("{context} did not converge within {iterations} iterations (last change {last_change:.3e})")]
    NotConverged {
        context: &'static str,
        iterations: usize,
        last_change: f64,
    },

    /// A backend routine (LAPACK) reported failure.
    #[error("backend routine {routine} failed with info = {info}")]
    Backend { routine: &'static str, info: i32 },

    /// An internal invariant was violated; indicates a bug or a model outside
    /// the method's assumptions (e.g. complex shifts on a symmetric problem).
    #[error("internal consistency violation: {0}")]
    InternalConsistency(String),

    /// Archive (de)serialization failures.
    #[error("archive error: {0}")]
    Archive(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand used by validation code.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dim(context: &'static str, left: impl Into<String>, right: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            context,
            left: left.into(),
            right: right.into(),
        }
    }
}
