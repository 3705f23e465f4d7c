//! Combining local bases into one global Galerkin basis.
//!
//! Local reductions at training parameters each produce a basis pair; the
//! parametric reduced model uses a single Galerkin basis spanning all of
//! them. Concatenating every trial basis and every distinct test basis,
//! orthonormalizing in the energy product, and truncating the rank keeps
//! the affine parameter structure intact and — with the symmetric pencils
//! this crate targets — the reduced models stable.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, rank_truncate, InnerProduct};
use crate::model::BasisPair;

/// Near-duplicate directions across local bases are removed at this
/// relative threshold during orthonormalization.
const GLOBAL_DROP_TOL: f64 = 1e-10;

/// Stacks the local bases `[V1 .. Vl W1 .. Wl]` (test bases skipped where
/// a local pair is Galerkin, since they equal the trial bases),
/// orthonormalizes in `m`, and truncates to at most `max_rank` directions
/// with relative singular-value tolerance `rtol`. `rtol = 0` keeps the
/// whole orthonormalized span up to `max_rank`; the returned pair is
/// always Galerkin.
pub fn global_basis(
    locals: &[BasisPair],
    m: &InnerProduct,
    rtol: f64,
    max_rank: usize,
) -> Result<BasisPair> {
    if locals.is_empty() {
        return Err(Error::EmptyBasis(
            "global basis needs at least one local basis".into(),
        ));
    }
    if !(rtol.is_finite() && (0.0..=1.0).contains(&rtol)) {
        return Err(Error::invalid(format!(
            "truncation tolerance {rtol} must lie in [0, 1]"
        )));
    }
    if max_rank == 0 {
        return Err(Error::invalid("global basis needs max_rank >= 1"));
    }
    let n = locals[0].full_order();
    let mut blocks: Vec<&DMatrix<f64>> = Vec::new();
    for local in locals {
        if local.full_order() != n {
            return Err(Error::dim(
                "global basis assembly",
                format!("state dimension {n}"),
                format!("local basis with {} rows", local.full_order()),
            ));
        }
        blocks.push(local.v());
    }
    for local in locals {
        if !local.is_galerkin() {
            blocks.push(local.w());
        }
    }
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut stacked = DMatrix::zeros(n, total);
    let mut at = 0usize;
    for b in blocks {
        stacked.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    let ortho = orthonormalize(&stacked, m, GLOBAL_DROP_TOL)?;
    if ortho.ncols() == 0 {
        return Err(Error::EmptyBasis(
            "local bases span nothing after orthonormalization".into(),
        ));
    }
    let v = if rtol == 0.0 && ortho.ncols() <= max_rank {
        // nothing to truncate: keep the span exactly
        ortho
    } else {
        rank_truncate(&ortho, rtol.max(f64::MIN_POSITIVE), max_rank)?
    };
    Ok(BasisPair::galerkin(v))
}
