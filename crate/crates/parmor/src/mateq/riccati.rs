//! Newton-Kleinman iteration for the generalized filter Riccati equation
//!
//! ```text
//!     A P E^T + E P A^T - E P C^T C P E^T + B B^T = 0.
//! ```
//!
//! After reduction to standard form (`At = E^-1 A`, `Bt = E^-1 B`, same
//! `P`), each Newton step linearizes around the current iterate: with
//! `A_k = At - P_k C^T C`, the next iterate solves the Lyapunov equation
//!
//! ```text
//!     A_k P_{k+1} + P_{k+1} A_k^T + P_k C^T C P_k + Bt Bt^T = 0.
//! ```
//!
//! Started from `P_0 = 0` with a stable `At`, every closed-loop operator
//! stays stable and the iterates converge quadratically to the stabilizing
//! solution. Each step is one dense Lyapunov solve; the final iterate is
//! validated against the full quadratic residual in the original
//! (descriptor) variables.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::dense::{DenseLyapSolver, DENSE_PROBLEM_LIMIT};

/// Required relative accuracy of the quadratic residual against
/// `|B B^T|_F`. One order looser than the Lyapunov threshold: the outer
/// iteration stops on the linearized residual, which trails the true one
/// slightly.
pub const RICCATI_RESIDUAL_RTOL: f64 = 1e-9;

/// Newton iteration cap. Convergence is quadratic once the iterate is
/// close; hitting this bound means the problem is effectively singular.
const NEWTON_MAX_ITER: usize = 30;

/// Relative Frobenius residual of the filter Riccati equation (absolute
/// when `B = 0`).
pub fn riccati_residual(
    a: &DMatrix<f64>,
    e: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let ap = a * p;
    let ep = e * p;
    let cp = c * p;
    let epct = &ep * c.transpose();
    let bbt = b * b.transpose();
    let r = &ap * e.transpose() + e * ap.transpose() - &epct * (&cp * e.transpose()) + &bbt;
    let denom = bbt.norm();
    if denom > 0.0 {
        r.norm() / denom
    } else {
        r.norm()
    }
}

/// Solves the generalized filter Riccati equation
/// `A P E^T + E P A^T - E P C^T C P E^T + B B^T = 0` for the stabilizing
/// `P` by the Newton-Kleinman iteration.
///
/// For the regulator companion
/// `A^T Q E + E^T Q A - E^T Q B B^T Q E + C^T C = 0`
/// call this with `(A^T, E^T, C^T, B^T)`.
pub fn solve_riccati_dense(
    a: &DMatrix<f64>,
    e: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || e.nrows() != n || e.ncols() != n {
        return Err(Error::dim(
            "Riccati solver",
            format!("A is {} x {}", a.nrows(), a.ncols()),
            format!("E is {} x {}", e.nrows(), e.ncols()),
        ));
    }
    if b.nrows() != n || c.ncols() != n {
        return Err(Error::dim(
            "Riccati solver",
            format!("operator order {n}"),
            format!("B has {} rows, C has {} columns", b.nrows(), c.ncols()),
        ));
    }
    if n > DENSE_PROBLEM_LIMIT {
        return Err(Error::UnsupportedSize {
            context: "Riccati solver",
            size: n,
            limit: DENSE_PROBLEM_LIMIT,
        });
    }
    if [a, e, b, c].iter().any(|m| m.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("Riccati data must be finite"));
    }

    // reduce to standard form once
    let e_lu = e.clone().lu();
    let mut at = a.clone();
    let mut bt = b.clone();
    if !e_lu.solve_mut(&mut at) || !e_lu.solve_mut(&mut bt) {
        return Err(Error::Singular("descriptor factorization"));
    }
    let btbt = &bt * bt.transpose();

    let riccati_context = |err: Error| match err {
        Error::Unstable { detail, .. } => Error::Unstable {
            context: "Riccati Newton step",
            detail,
        },
        other => other,
    };

    let mut p = DMatrix::<f64>::zeros(n, n);
    let mut residual = f64::INFINITY;
    for _iter in 0..NEWTON_MAX_ITER {
        // closed-loop operator and shifted right-hand side; p is symmetric,
        // so P C^T C P = (C P)^T (C P)
        let cp = c * &p;
        let a_k = &at - (&p * c.transpose()) * c;
        let s = &btbt + cp.transpose() * &cp;
        let solver = DenseLyapSolver::new_standard(&a_k).map_err(riccati_context)?;
        let p_next = solver.solve_reduced_sym_rhs(&s)?;
        let change = (&p_next - &p).norm();
        let scale = p_next.norm().max(1.0);
        p = p_next;
        residual = riccati_residual(a, e, b, c, &p);
        if residual <= RICCATI_RESIDUAL_RTOL || change <= f64::EPSILON * scale {
            break;
        }
    }
    if residual > RICCATI_RESIDUAL_RTOL {
        return Err(Error::NewtonDivergence {
            iterations: NEWTON_MAX_ITER,
            residual,
        });
    }
    Ok((&p + p.transpose()) * 0.5)
}
