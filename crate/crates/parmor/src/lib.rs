//! Model order reduction for parametric linear time-invariant systems.
//!
//! The crate revolves around descriptor systems
//!
//! ```text
//!     E x'(t) = A(mu) x(t) + B u(t),        y(t) = C x(t),
//! ```
//!
//! where the system operator depends affinely on a parameter vector,
//! `A(mu) = A_0 + sum_i mu_i A_i`. Everything else builds on that:
//!
//! - [`model`] defines the system type, projection-based reduction, time
//!   stepping, and transfer-function evaluation;
//! - [`thermalblock`] assembles the finite-difference benchmark family used
//!   throughout the examples and tests;
//! - [`mateq`] solves the Lyapunov and Riccati equations behind balancing
//!   methods, densely and in low-rank ADI form;
//! - [`reductors`] implements the actual reduction algorithms: POD, greedy
//!   reduced-basis sampling, balanced truncation (standard and LQG), IRKA,
//!   its one-sided variant, and global-basis assembly for parametric runs;
//! - [`metrics`] measures what came out: H2 norms and errors, Hankel
//!   singular values, and the balanced-truncation error bound.
//!
//! Dense kernels (Schur, symmetric and generalized eigenvalue problems,
//! quasi-triangular Sylvester solves) are delegated to LAPACK; sparse
//! operators use the compressed-row storage and banded factorizations from
//! [`sparse`].

// Force linkage of the system BLAS/LAPACK libraries.
extern crate openblas_src;

pub mod error;
pub mod linalg;
pub mod mateq;
pub mod metrics;
pub mod model;
pub mod reductors;
pub mod sparse;
pub mod thermalblock;

pub use error::{Error, Result};
pub use sparse::CsrMatrix;
