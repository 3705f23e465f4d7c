//! Low-rank ADI iteration and shift selection.
//!
//! The low-rank ADI method builds `P ~ Z Z^T` for
//! `A P E^T + E P A^T + B B^T = 0` one block of columns at a time:
//!
//! ```text
//!     V_i = (A + s_i E)^-1 W_{i-1},        W_i = W_{i-1} - 2 Re(s_i) E V_i,
//! ```
//!
//! starting from `W_0 = B` and appending `sqrt(-2 Re(s_i)) V_i` to `Z`. The
//! residual stays in factored form, `R_i = W_i W_i^T`, so its Frobenius norm
//! is that of the small matrix `W_i^T W_i`. Complex conjugate shift pairs
//! are processed in one real double step, keeping `Z` real.
//!
//! Shifts are the classic heuristic: Ritz values of `E^-1 A` from a short
//! Arnoldi run approximate the spectrum, get mirrored into the left half
//! plane if needed, and a greedy sweep picks the subset minimizing the ADI
//! spectral radius over the remaining candidates.

use std::collections::HashMap;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{factor_complex, factor_real, OpMatrix};

use super::LowRankFactor;

/// A conjugate-closed set of stable shifts (`Re < 0`), conjugate pairs
/// stored adjacently with the positive-imaginary member first.
#[derive(Debug, Clone)]
pub struct ShiftSet {
    shifts: Vec<Complex<f64>>,
}

impl ShiftSet {
    /// Validates and canonicalizes a shift list: every shift must have a
    /// negative real part, and non-real shifts must occur together with
    /// their conjugates.
    pub fn new(shifts: Vec<Complex<f64>>) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::invalid("shift set must not be empty"));
        }
        for s in &shifts {
            if !(s.re.is_finite() && s.im.is_finite()) {
                return Err(Error::invalid("shifts must be finite"));
            }
            if s.re >= 0.0 {
                return Err(Error::invalid(format!(
                    "shift {s} must have negative real part"
                )));
            }
        }
        // pair up conjugates, preserving first-occurrence order
        let mut remaining: Vec<Complex<f64>> = shifts;
        let mut canonical = Vec::with_capacity(remaining.len());
        while let Some(s) = remaining.first().copied() {
            remaining.remove(0);
            if s.im == 0.0 {
                canonical.push(s);
                continue;
            }
            let conj = s.conj();
            let pos = remaining
                .iter()
                .position(|t| *t == conj)
                .ok_or_else(|| {
                    Error::invalid(format!("shift {s} lacks its conjugate partner"))
                })?;
            remaining.remove(pos);
            if s.im > 0.0 {
                canonical.push(s);
                canonical.push(conj);
            } else {
                canonical.push(conj);
                canonical.push(s);
            }
        }
        Ok(ShiftSet { shifts: canonical })
    }

    pub fn shifts(&self) -> &[Complex<f64>] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }
}

/// Tuning knobs for [`adi_shifts`] and [`lr_adi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiOptions {
    /// Number of shifts the heuristic aims for (a conjugate pair may round
    /// this up by one).
    pub num_shifts: usize,
    /// Arnoldi subspace dimension used to estimate Ritz values.
    pub subspace_dim: usize,
    /// Relative residual target `|W^T W|_F <= res_tol * |B^T B|_F`.
    pub res_tol: f64,
    /// Iteration cap; shifts are recycled cyclically until convergence.
    pub max_iter: usize,
}

impl Default for AdiOptions {
    fn default() -> Self {
        AdiOptions {
            num_shifts: 20,
            subspace_dim: 40,
            res_tol: 1e-9,
            max_iter: 100,
        }
    }
}

/// Ritz values of `E^-1 A` from an Arnoldi run of dimension at most `m`,
/// started from the normalized all-ones vector (deterministic).
pub(crate) fn arnoldi_ritz(a: &OpMatrix, e: &OpMatrix, m: usize) -> Result<Vec<Complex<f64>>> {
    let n = a.nrows();
    let m = m.min(n);
    let e_factor = factor_real(1.0, e, 0.0, a)?;
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m + 1);
    let v0 = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    basis.push(v0);
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut steps = 0usize;
    for j in 0..m {
        let mut w = e_factor.solve_vec(&a.matvec(&basis[j]))?;
        let wscale = w.norm();
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = q.dot(&w);
                h[(i, j)] += c;
                w.axpy(-c, q, 1.0);
            }
        }
        steps = j + 1;
        let hn = w.norm();
        h[(j + 1, j)] = hn;
        if hn <= 1e-12 * wscale.max(1.0) {
            break;
        }
        basis.push(w / hn);
    }
    let hm = h.view((0, 0), (steps, steps)).clone_owned();
    let ritz = hm.complex_eigenvalues();
    Ok(ritz.iter().copied().collect())
}

/// ADI spectral-radius factor `|(l - p) / (l + conj(p))|` of shift `p` at
/// spectrum point `l`.
fn rho(l: Complex<f64>, p: Complex<f64>) -> f64 {
    ((l - p) / (l + p.conj())).norm()
}

/// Heuristic ADI shifts for the pencil `(A, E)`.
///
/// Mirrors unstable Ritz values into the left half plane, then greedily
/// selects `num_shifts` of them: the first minimizes the worst-case `rho`
/// over all candidates, each further shift is the candidate where the
/// current rational function is largest. Deterministic throughout; ties
/// resolve to the lowest index.
pub fn adi_shifts(
    a: &OpMatrix,
    e: &OpMatrix,
    num_shifts: usize,
    subspace_dim: usize,
) -> Result<ShiftSet> {
    if num_shifts == 0 {
        return Err(Error::invalid("need at least one shift"));
    }
    if subspace_dim == 0 {
        return Err(Error::invalid("Arnoldi subspace must have positive dimension"));
    }
    if !a.is_square() || !e.is_square() || a.nrows() != e.nrows() {
        return Err(Error::dim(
            "shift computation",
            format!("{} x {}", a.nrows(), a.ncols()),
            format!("{} x {}", e.nrows(), e.ncols()),
        ));
    }
    let ritz = arnoldi_ritz(a, e, subspace_dim)?;
    // mirror into the open left half plane
    let candidates: Vec<Complex<f64>> = ritz
        .iter()
        .map(|l| {
            let re = if l.re.abs() > 0.0 {
                -l.re.abs()
            } else {
                -1e-8 * l.norm().max(1.0)
            };
            Complex::new(re, l.im)
        })
        .collect();

    let mut selected: Vec<Complex<f64>> = Vec::with_capacity(num_shifts + 1);
    // first shift: minimax over the candidate cloud
    let mut best_idx = 0usize;
    let mut best_val = f64::INFINITY;
    for (i, p) in candidates.iter().enumerate() {
        let worst = candidates
            .iter()
            .map(|l| rho(*l, *p))
            .fold(0.0f64, f64::max);
        if worst < best_val {
            best_val = worst;
            best_idx = i;
        }
    }
    let push_with_conj = |sel: &mut Vec<Complex<f64>>, p: Complex<f64>| {
        if p.im == 0.0 {
            sel.push(p);
        } else {
            sel.push(Complex::new(p.re, p.im.abs()));
            sel.push(Complex::new(p.re, -p.im.abs()));
        }
    };
    push_with_conj(&mut selected, candidates[best_idx]);
    while selected.len() < num_shifts {
        let mut arg = 0usize;
        let mut val = -1.0f64;
        for (i, l) in candidates.iter().enumerate() {
            let f: f64 = selected.iter().map(|p| rho(*l, *p)).product();
            if f > val {
                val = f;
                arg = i;
            }
        }
        if val <= 0.0 {
            // every candidate is already interpolated; more shifts would
            // only duplicate existing ones
            break;
        }
        push_with_conj(&mut selected, candidates[arg]);
    }
    ShiftSet::new(selected)
}

/// Outcome of [`lr_adi`].
#[derive(Debug, Clone)]
pub struct AdiResult {
    pub factor: LowRankFactor,
    /// Whether the residual target was met within `max_iter` iterations.
    pub converged: bool,
    /// Number of shifts consumed (a complex pair counts as two).
    pub iterations: usize,
    /// Relative residual after each iteration.
    pub residual_history: Vec<f64>,
}

/// Low-rank ADI solve of `A P E^T + E P A^T + B B^T = 0`.
///
/// Shifts are recycled cyclically; factorizations are cached per distinct
/// shift, so a recycled shift costs only back-substitution. For the
/// observability Gramian call with `(A^T, E^T, C^T)`.
pub fn lr_adi(
    a: &OpMatrix,
    e: &OpMatrix,
    b: &DMatrix<f64>,
    shifts: &ShiftSet,
    res_tol: f64,
    max_iter: usize,
) -> Result<AdiResult> {
    let n = a.nrows();
    if !a.is_square() || !e.is_square() || e.nrows() != n || b.nrows() != n {
        return Err(Error::dim(
            "low-rank ADI",
            format!("operator order {n}"),
            format!(
                "E is {} x {}, B has {} rows",
                e.nrows(),
                e.ncols(),
                b.nrows()
            ),
        ));
    }
    if !(res_tol.is_finite() && res_tol > 0.0) {
        return Err(Error::invalid(format!("residual tolerance {res_tol} must be positive")));
    }
    if max_iter == 0 {
        return Err(Error::invalid("need at least one ADI iteration"));
    }
    let m = b.ncols();
    let b_ref_norm = (b.transpose() * b).norm();
    if b_ref_norm == 0.0 {
        return Ok(AdiResult {
            factor: LowRankFactor::new(DMatrix::zeros(n, 0)),
            converged: true,
            iterations: 0,
            residual_history: vec![0.0],
        });
    }

    let list = shifts.shifts();
    let mut real_factors: HashMap<usize, crate::model::RealFactor> = HashMap::new();
    let mut complex_factors: HashMap<usize, crate::model::ComplexFactor> = HashMap::new();

    let mut w = b.clone();
    let mut z_cols: Vec<DMatrix<f64>> = Vec::new();
    let mut history = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;

    let mut pos = 0usize; // index into the canonical shift list
    while iterations < max_iter && !converged {
        let idx = pos % list.len();
        let s = list[idx];
        if s.im == 0.0 {
            let f = match real_factors.entry(idx) {
                std::collections::hash_map::Entry::Occupied(o) => o.into_mut(),
                std::collections::hash_map::Entry::Vacant(v) => {
                    v.insert(factor_real(s.re, e, 1.0, a)?)
                }
            };
            let mut v = w.clone();
            f.solve_in_place(&mut v)?;
            let ev = e.mul_dense(&v);
            w += &ev * (-2.0 * s.re);
            z_cols.push(&v * (-2.0 * s.re).sqrt());
            iterations += 1;
            pos += 1;
            let resid = (w.transpose() * &w).norm() / b_ref_norm;
            history.push(resid);
            converged = resid <= res_tol;
        } else {
            // canonical order guarantees s has positive imaginary part and
            // list[idx + 1] is its conjugate
            debug_assert!(s.im > 0.0);
            let f = match complex_factors.entry(idx) {
                std::collections::hash_map::Entry::Occupied(o) => o.into_mut(),
                std::collections::hash_map::Entry::Vacant(vac) => vac.insert(factor_complex(
                    s,
                    e,
                    Complex::new(1.0, 0.0),
                    a,
                )?),
            };
            let mut vc = DMatrix::from_fn(n, m, |i, j| Complex::new(w[(i, j)], 0.0));
            f.solve_in_place(&mut vc)?;
            let vr = vc.map(|z| z.re);
            let vi = vc.map(|z| z.im);
            let delta = s.re / s.im;
            let vplus = &vr + &vi * delta;
            let evplus = e.mul_dense(&vplus);
            w += &evplus * (-4.0 * s.re);
            // gamma^2 = -4 Re(s): the two real blocks stand in for two
            // complex iterations, so they carry both steps' scaling
            let scale = 2.0 * (-s.re).sqrt();
            z_cols.push(&vplus * scale);
            z_cols.push(&vi * (scale * (delta * delta + 1.0).sqrt()));
            iterations += 2;
            pos += 2;
            let resid = (w.transpose() * &w).norm() / b_ref_norm;
            history.push(resid);
            history.push(resid);
            converged = resid <= res_tol;
        }
    }

    let total = z_cols.iter().map(|c| c.ncols()).sum::<usize>();
    let mut z = DMatrix::zeros(n, total);
    let mut off = 0usize;
    for blk in &z_cols {
        z.view_mut((0, off), (n, blk.ncols())).copy_from(blk);
        off += blk.ncols();
    }
    Ok(AdiResult {
        factor: LowRankFactor::new(z),
        converged,
        iterations,
        residual_history: history,
    })
}
