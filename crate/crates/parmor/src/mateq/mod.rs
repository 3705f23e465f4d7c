//! Solvers for the matrix equations behind balancing-type reduction.
//!
//! Two routes to the controllability Gramian `P` of
//! `A P E^T + E P A^T + B B^T = 0` are provided:
//!
//! - [`dense::solve_lyapunov_dense`], a Bartels-Stewart solver on the
//!   equivalent reduced equation (with a symmetric fast path), practical up
//!   to order [`dense::DENSE_PROBLEM_LIMIT`];
//! - [`adi::lr_adi`], the low-rank ADI iteration producing `P ~ Z Z^T` from
//!   sparse shifted solves, with shifts from [`adi::adi_shifts`].
//!
//! The observability Gramian solves the transposed equation; call either
//! solver with `(A^T, E^T, C^T)`. [`riccati::solve_riccati_dense`] covers
//! the filter Riccati equation needed by LQG balancing via Newton-Kleinman
//! iteration, each step of which is one dense Lyapunov solve.

pub mod adi;
pub mod dense;
pub mod riccati;

pub use adi::{adi_shifts, lr_adi, AdiOptions, AdiResult, ShiftSet};
pub use dense::{
    lyapunov_residual, lyapunov_residual_abs, solve_lyapunov_dense, DenseLyapSolver,
    DENSE_PROBLEM_LIMIT, LYAPUNOV_RESIDUAL_RTOL,
};
pub use riccati::{riccati_residual, solve_riccati_dense, RICCATI_RESIDUAL_RTOL};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::backend;
use crate::model::OpMatrix;

/// Low-rank factor `Z` of a symmetric positive semidefinite matrix
/// `P ~ Z Z^T`.
#[derive(Debug, Clone)]
pub struct LowRankFactor {
    z: DMatrix<f64>,
}

impl LowRankFactor {
    pub fn new(z: DMatrix<f64>) -> Self {
        LowRankFactor { z }
    }

    /// Factors a dense symmetric positive semidefinite matrix through its
    /// eigendecomposition, dropping directions below the numerical noise
    /// floor. Lets dense Gramians flow into the factor-based balancing
    /// pipeline.
    pub fn from_gramian(p: &DMatrix<f64>) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n {
            return Err(Error::dim(
                "Gramian factorization",
                format!("{n} rows"),
                format!("{} columns", p.ncols()),
            ));
        }
        let sym = (p + p.transpose()) * 0.5;
        let (w, u) = backend::sym_eigen(&sym)?;
        let wmax = w.iter().copied().fold(0.0f64, f64::max);
        let floor = n as f64 * f64::EPSILON * wmax;
        if w.iter().any(|&l| l < -floor.max(f64::MIN_POSITIVE)) {
            return Err(Error::invalid(format!(
                "matrix is not positive semidefinite (eigenvalue {:.3e})",
                w.iter().copied().fold(f64::INFINITY, f64::min)
            )));
        }
        // eigenvalues ascend; keep the tail above the floor, largest first
        let kept: Vec<usize> = (0..n).rev().filter(|&i| w[i] > floor).collect();
        let mut z = DMatrix::zeros(n, kept.len());
        for (col, &i) in kept.iter().enumerate() {
            let scale = w[i].sqrt();
            z.column_mut(col).copy_from(&(u.column(i) * scale));
        }
        Ok(LowRankFactor { z })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn rank(&self) -> usize {
        self.z.ncols()
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    /// Materializes `Z Z^T`; intended for tests and small problems.
    pub fn to_gramian(&self) -> DMatrix<f64> {
        &self.z * self.z.transpose()
    }
}

/// How Lyapunov equations get solved when both lanes are available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LyapunovMethod {
    /// Reduce to dense standard form and solve exactly.
    Dense,
    /// Low-rank ADI with heuristic shifts.
    LowRank(AdiOptions),
}

/// Both system Gramians of `(E, A, B, C)` in factored form: `P ~ Z_P Z_P^T`
/// solving `A P E^T + E P A^T + B B^T = 0` and `Q ~ Z_Q Z_Q^T` solving
/// `A^T Q E + E^T Q A + C^T C = 0`.
///
/// The dense lane factors one pencil and reuses it for the transposed
/// equation whenever `A` and `E` are symmetric; the low-rank lane reuses
/// the shift set, since the transposed pencil has the same spectrum.
pub fn gramian_factors(
    a: &OpMatrix,
    e: &OpMatrix,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    method: LyapunovMethod,
) -> Result<(LowRankFactor, LowRankFactor)> {
    match method {
        LyapunovMethod::Dense => {
            let ad = a.to_dense();
            let ed = e.to_dense();
            let solver = DenseLyapSolver::new(&ad, &ed)?;
            let p = solver.solve(b)?;
            let q = if solver.symmetric_pencil() {
                solver.solve(&c.transpose())?
            } else {
                solve_lyapunov_dense(&ad.transpose(), &ed.transpose(), &c.transpose())?
            };
            Ok((LowRankFactor::from_gramian(&p)?, LowRankFactor::from_gramian(&q)?))
        }
        LyapunovMethod::LowRank(opts) => {
            let shifts = adi_shifts(a, e, opts.num_shifts, opts.subspace_dim)?;
            let at = a.transpose();
            let et = e.transpose();
            let rp = lr_adi(a, e, b, &shifts, opts.res_tol, opts.max_iter)?;
            let rq = lr_adi(&at, &et, &c.transpose(), &shifts, opts.res_tol, opts.max_iter)?;
            for (context, res) in [
                ("low-rank ADI (controllability)", &rp),
                ("low-rank ADI (observability)", &rq),
            ] {
                if !res.converged {
                    return Err(Error::NotConverged {
                        context,
                        iterations: res.iterations,
                        last_change: res.residual_history.last().copied().unwrap_or(f64::NAN),
                    });
                }
            }
            Ok((rp.factor, rq.factor))
        }
    }
}
