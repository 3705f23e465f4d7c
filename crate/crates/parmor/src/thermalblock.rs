//! The thermal-block benchmark family.
//!
//! The heat equation on the unit square with homogeneous Dirichlet boundary,
//! a uniform source, and a piecewise-constant diffusion coefficient: the
//! square splits into `k x k` equally sized blocks and parameter component
//! `mu_b` scales the conductivity of block `b`. Discretization is the
//! classic five-point finite-difference stencil on a `g x g` interior grid
//! with spacing `h = 1/(g+1)`, giving a descriptor system of order `n = g^2`
//! with
//!
//! - `E = h^2 I` (lumped mass scaling),
//! - `A(mu) = sum_b mu_b A_b`, the stencil split by block membership,
//! - `B = h^2 * 1` (the uniform source),
//! - `C` either per-block or whole-domain temperature averages.
//!
//! Edges crossing a block interface take the arithmetic mean of the two
//! adjacent conductivities. That choice is what keeps the split exactly
//! affine: the mean is linear in `(mu_a, mu_b)`, so half of the edge stencil
//! lands in each block's term and [`verify_affine_consistency`] can compare
//! a directly assembled `A(mu)` against the affine evaluation at round-off
//! level.
//!
//! The natural energy inner product for this discretization is the stiffness
//! form at unit conductivity, `M = -A(1)`, symmetric positive definite; it
//! is attached to every built model.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::InnerProduct;
use crate::model::{AffineOperator, LtiModel, OpMatrix, Parameter};
use crate::sparse::CsrMatrix;

/// Which outputs the model observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    /// One output per block: the mean temperature over the block's nodes.
    BlockAverages,
    /// A single output: the mean temperature over all nodes.
    DomainAverage,
}

/// Geometry and output selection for [`build`].
#[derive(Debug, Clone, Copy)]
pub struct ThermalBlockSpec {
    /// Blocks per side (`k`); the parameter dimension is `k^2`.
    pub blocks_per_side: usize,
    /// Interior grid nodes per side (`g`); the model order is `g^2`.
    pub grid_per_side: usize,
    pub output: OutputMode,
}

impl ThermalBlockSpec {
    pub fn new(blocks_per_side: usize, grid_per_side: usize, output: OutputMode) -> Result<Self> {
        if blocks_per_side == 0 {
            return Err(Error::invalid("need at least one block per side"));
        }
        if grid_per_side < blocks_per_side {
            return Err(Error::invalid(format!(
                "grid of {grid_per_side} nodes per side cannot resolve {blocks_per_side} blocks"
            )));
        }
        Ok(ThermalBlockSpec {
            blocks_per_side,
            grid_per_side,
            output,
        })
    }

    /// Model order `g^2`.
    pub fn order(&self) -> usize {
        self.grid_per_side * self.grid_per_side
    }

    /// Parameter dimension `k^2`.
    pub fn num_params(&self) -> usize {
        self.blocks_per_side * self.blocks_per_side
    }

    /// Grid spacing `1 / (g + 1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.grid_per_side as f64 + 1.0)
    }

    /// Block index of the node at grid coordinates `(ix, iy)`, row-major in
    /// the block grid. Node `ix` lies in block column `ix * k / g` (integer
    /// division), and likewise for rows.
    pub fn block_of(&self, ix: usize, iy: usize) -> usize {
        let k = self.blocks_per_side;
        let g = self.grid_per_side;
        let bx = ix * k / g;
        let by = iy * k / g;
        by * k + bx
    }

    fn node(&self, ix: usize, iy: usize) -> usize {
        iy * self.grid_per_side + ix
    }
}

/// Accumulates the stencil of one grid edge, weighted by `w`, into a triplet
/// list. `v = None` marks a boundary edge (the neighbor is a Dirichlet node
/// and contributes only to the diagonal).
fn push_edge(triplets: &mut Vec<(usize, usize, f64)>, w: f64, u: usize, v: Option<usize>) {
    triplets.push((u, u, -w));
    if let Some(v) = v {
        triplets.push((u, v, w));
        triplets.push((v, v, -w));
        triplets.push((v, u, w));
    }
}

/// Visits every edge of the grid once and hands it to `emit` as
/// `(block_u, block_v, u, v)`; boundary edges have `v = None` and
/// `block_v = block_u`.
fn for_each_edge(spec: &ThermalBlockSpec, mut emit: impl FnMut(usize, usize, usize, Option<usize>)) {
    let g = spec.grid_per_side;
    for iy in 0..g {
        for ix in 0..g {
            let u = spec.node(ix, iy);
            let bu = spec.block_of(ix, iy);
            // interior edges, each visited from its lower-index endpoint
            if ix + 1 < g {
                emit(bu, spec.block_of(ix + 1, iy), u, Some(spec.node(ix + 1, iy)));
            }
            if iy + 1 < g {
                emit(bu, spec.block_of(ix, iy + 1), u, Some(spec.node(ix, iy + 1)));
            }
            // boundary edges
            if ix == 0 {
                emit(bu, bu, u, None);
            }
            if ix + 1 == g {
                emit(bu, bu, u, None);
            }
            if iy == 0 {
                emit(bu, bu, u, None);
            }
            if iy + 1 == g {
                emit(bu, bu, u, None);
            }
        }
    }
}

fn output_matrix(spec: &ThermalBlockSpec) -> DMatrix<f64> {
    let n = spec.order();
    let g = spec.grid_per_side;
    match spec.output {
        OutputMode::DomainAverage => DMatrix::from_element(1, n, 1.0 / n as f64),
        OutputMode::BlockAverages => {
            let p = spec.num_params();
            let mut counts = vec![0usize; p];
            for iy in 0..g {
                for ix in 0..g {
                    counts[spec.block_of(ix, iy)] += 1;
                }
            }
            let mut c = DMatrix::zeros(p, n);
            for iy in 0..g {
                for ix in 0..g {
                    let b = spec.block_of(ix, iy);
                    c[(b, spec.node(ix, iy))] = 1.0 / counts[b] as f64;
                }
            }
            c
        }
    }
}

/// Sparse affine terms `A_1 .. A_d` of the stencil split by block, plus the
/// zero constant term.
fn affine_terms(spec: &ThermalBlockSpec) -> Result<AffineOperator> {
    let n = spec.order();
    let d = spec.num_params();
    let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); d];
    for_each_edge(spec, |bu, bv, u, v| {
        if bu == bv {
            push_edge(&mut triplets[bu], 1.0, u, v);
        } else {
            // interface edge: arithmetic mean of the two conductivities,
            // so each block's term receives half the stencil
            push_edge(&mut triplets[bu], 0.5, u, v);
            push_edge(&mut triplets[bv], 0.5, u, v);
        }
    });
    let terms = triplets
        .into_iter()
        .map(|t| Ok(OpMatrix::Sparse(CsrMatrix::from_triplets(n, n, &t)?)))
        .collect::<Result<Vec<_>>>()?;
    AffineOperator::new(
        OpMatrix::Sparse(CsrMatrix::from_triplets(n, n, &[])?),
        terms,
    )
}

/// Builds the parametric thermal-block model for the given geometry.
pub fn build(spec: &ThermalBlockSpec) -> Result<LtiModel> {
    let n = spec.order();
    let h2 = spec.spacing() * spec.spacing();
    let a = affine_terms(spec)?;
    let energy = energy_product(&a, spec)?;
    LtiModel::new(
        OpMatrix::Sparse(CsrMatrix::scaled_identity(n, h2)),
        a,
        DMatrix::from_element(n, 1, h2),
        output_matrix(spec),
        energy,
    )
}

/// Stiffness inner product `M = -A(1)`.
fn energy_product(a: &AffineOperator, spec: &ThermalBlockSpec) -> Result<InnerProduct> {
    let at_ones = a.eval(&Parameter::ones(spec.num_params()))?;
    let OpMatrix::Sparse(m) = at_ones else {
        return Err(Error::InternalConsistency(
            "thermal block operator must be sparse".into(),
        ));
    };
    InnerProduct::sparse(m.scale(-1.0))
}

/// One-parameter variant: a `2 x 2` thermal block where only block 0 (the
/// lower-left quadrant) is parametric, `A(mu) = A_bg + mu A_var`. The
/// background `A_bg` collects the other three blocks at unit conductivity.
pub fn build_one_param(grid_per_side: usize, output: OutputMode) -> Result<LtiModel> {
    let spec = ThermalBlockSpec::new(2, grid_per_side, output)?;
    let n = spec.order();
    let h2 = spec.spacing() * spec.spacing();
    let full = affine_terms(&spec)?;
    let energy = energy_product(&full, &spec)?;
    let terms = full.terms();
    let background = {
        let mut parts: Vec<(f64, &CsrMatrix)> = Vec::new();
        for t in &terms[1..] {
            let OpMatrix::Sparse(m) = t else { unreachable!() };
            parts.push((1.0, m));
        }
        CsrMatrix::linear_combination(&parts)?
    };
    let variable = terms[0].clone();
    LtiModel::new(
        OpMatrix::Sparse(CsrMatrix::scaled_identity(n, h2)),
        AffineOperator::new(OpMatrix::Sparse(background), vec![variable])?,
        DMatrix::from_element(n, 1, h2),
        output_matrix(&spec),
        energy,
    )
}

/// Assembles `A(mu)` monolithically (computing each edge weight directly
/// from the parameter) and returns the largest absolute entrywise deviation
/// from the affine evaluation. For parameters of moderate size this is a
/// round-off-level number; values above ~1e-13 indicate an assembly bug.
pub fn verify_affine_consistency(spec: &ThermalBlockSpec, mu: &Parameter) -> Result<f64> {
    if mu.len() != spec.num_params() {
        return Err(Error::dim(
            "thermal block parameter",
            format!("{} blocks", spec.num_params()),
            format!("parameter of length {}", mu.len()),
        ));
    }
    let n = spec.order();
    let mut triplets = Vec::new();
    let m = mu.values();
    for_each_edge(spec, |bu, bv, u, v| {
        let w = if bu == bv {
            m[bu]
        } else {
            0.5 * (m[bu] + m[bv])
        };
        push_edge(&mut triplets, w, u, v);
    });
    let monolithic = CsrMatrix::from_triplets(n, n, &triplets)?;
    let affine = build(spec)?.eval_a(mu)?;
    let OpMatrix::Sparse(affine) = affine else { unreachable!() };
    Ok(affine.add_scaled(-1.0, &monolithic)?.max_abs())
}
