//! Parametric descriptor systems and projection-based reduction.
//!
//! The central type is [`LtiModel`], the realization of
//!
//! ```text
//!     E x'(t) = A(mu) x(t) + B u(t),        y(t) = C x(t),
//! ```
//!
//! with an affine parameter dependence `A(mu) = A_0 + sum_i mu_i A_i` held in
//! an [`AffineOperator`]. A model answers the questions reduction methods
//! ask of it: evaluate `A` at a parameter, step the dynamics with implicit
//! Euler ([`LtiModel::simulate`]), evaluate the transfer function
//! `C (s E - A(mu))^-1 B` ([`LtiModel::transfer`]), compute poles, and
//! Petrov-Galerkin-project onto a [`BasisPair`] ([`LtiModel::project`]).
//! Reduced models are ordinary [`LtiModel`]s again, so everything composes.

pub mod archive;
mod op;

pub use archive::{load_model, save_model};
pub use op::{factor_complex, factor_real, ComplexFactor, OpMatrix, RealFactor};

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, InnerProduct};
use crate::sparse::CsrMatrix;

/// A point in parameter space. May be empty for non-parametric models.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter(Vec<f64>);

impl Parameter {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameter values must be finite"));
        }
        Ok(Parameter(values))
    }

    /// The empty parameter, for models without parametric terms.
    pub fn empty() -> Self {
        Parameter(Vec::new())
    }

    /// All components equal to one.
    pub fn ones(len: usize) -> Self {
        Parameter(vec![1.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl std::fmt::Display for Parameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:e}")?;
        }
        write!(f, "]")
    }
}

/// Affine operator family `A(mu) = A_0 + sum_i mu_i A_i`.
#[derive(Debug, Clone)]
pub struct AffineOperator {
    constant: OpMatrix,
    terms: Vec<OpMatrix>,
}

impl AffineOperator {
    pub fn new(constant: OpMatrix, terms: Vec<OpMatrix>) -> Result<Self> {
        if !constant.is_square() {
            return Err(Error::invalid("affine operator must be square"));
        }
        let n = constant.nrows();
        for (i, t) in terms.iter().enumerate() {
            if !t.is_square() || t.nrows() != n {
                return Err(Error::dim(
                    "affine operator term",
                    format!("{n} x {n}"),
                    format!("term {i}: {} x {}", t.nrows(), t.ncols()),
                ));
            }
        }
        Ok(AffineOperator { constant, terms })
    }

    /// Operator without parameter dependence.
    pub fn constant(matrix: OpMatrix) -> Self {
        AffineOperator {
            constant: matrix,
            terms: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.constant.nrows()
    }

    /// Number of parametric terms (the expected parameter dimension).
    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn constant_term(&self) -> &OpMatrix {
        &self.constant
    }

    pub fn terms(&self) -> &[OpMatrix] {
        &self.terms
    }

    /// Evaluates `A_0 + sum_i mu_i A_i`.
    ///
    /// When every term is sparse the result keeps the union sparsity pattern
    /// of all terms, independent of the parameter values; cancellations stay
    /// as explicit zeros. Mixed or dense representations produce a dense
    /// result.
    pub fn eval(&self, mu: &Parameter) -> Result<OpMatrix> {
        if mu.len() != self.terms.len() {
            return Err(Error::dim(
                "affine evaluation",
                format!("{} parametric terms", self.terms.len()),
                format!("parameter of length {}", mu.len()),
            ));
        }
        if self.terms.is_empty() {
            return Ok(self.constant.clone());
        }
        let all_sparse = std::iter::once(&self.constant)
            .chain(self.terms.iter())
            .all(|t| matches!(t, OpMatrix::Sparse(_)));
        if all_sparse {
            let mut parts: Vec<(f64, &CsrMatrix)> = Vec::with_capacity(1 + self.terms.len());
            let OpMatrix::Sparse(c) = &self.constant else { unreachable!() };
            parts.push((1.0, c));
            for (coeff, term) in mu.values().iter().zip(&self.terms) {
                let OpMatrix::Sparse(t) = term else { unreachable!() };
                parts.push((*coeff, t));
            }
            Ok(OpMatrix::Sparse(CsrMatrix::linear_combination(&parts)?))
        } else {
            let mut acc = self.constant.to_dense();
            for (coeff, term) in mu.values().iter().zip(&self.terms) {
                acc += term.to_dense() * *coeff;
            }
            Ok(OpMatrix::Dense(acc))
        }
    }
}

/// Trial and test bases for Petrov-Galerkin projection.
///
/// `W = V` (the Galerkin case) is stored implicitly so the distinction
/// survives projection and can be queried by methods that require one-sided
/// bases.
#[derive(Debug, Clone)]
pub struct BasisPair {
    v: DMatrix<f64>,
    w: Option<DMatrix<f64>>,
}

impl BasisPair {
    /// One-sided basis: `W = V`.
    pub fn galerkin(v: DMatrix<f64>) -> Self {
        BasisPair { v, w: None }
    }

    /// Two-sided basis with distinct trial and test spaces.
    pub fn petrov_galerkin(v: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        if v.shape() != w.shape() {
            return Err(Error::dim(
                "basis pair",
                format!("V is {} x {}", v.nrows(), v.ncols()),
                format!("W is {} x {}", w.nrows(), w.ncols()),
            ));
        }
        Ok(BasisPair { v, w: Some(w) })
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn w(&self) -> &DMatrix<f64> {
        self.w.as_ref().unwrap_or(&self.v)
    }

    pub fn is_galerkin(&self) -> bool {
        self.w.is_none()
    }

    /// Reduced order produced by this pair.
    pub fn order(&self) -> usize {
        self.v.ncols()
    }

    /// Full order the pair projects from.
    pub fn full_order(&self) -> usize {
        self.v.nrows()
    }
}

/// Input signal on the simulation grid.
#[derive(Debug, Clone)]
pub enum InputSignal {
    /// `u(t) = 0`.
    Zero,
    /// Constant `u(t) = amplitude` applied to every input channel.
    Step(f64),
    /// One scalar per time step, applied to every input channel. Must match
    /// the number of steps of the simulation it is used in.
    Samples(Vec<f64>),
}

impl InputSignal {
    /// Input value driving the step that ends at time index `k >= 1`.
    pub(crate) fn value_at(&self, k: usize) -> f64 {
        match self {
            InputSignal::Zero => 0.0,
            InputSignal::Step(a) => *a,
            InputSignal::Samples(v) => v[k - 1],
        }
    }
}

/// Time-discrete trajectory produced by [`LtiModel::simulate`].
///
/// Column `k` of `states`/`outputs` belongs to `times[k]`; the initial
/// condition at `t = 0` is included, so there is one more column than steps.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
    pub outputs: DMatrix<f64>,
}

/// Descriptor realization of a parametric LTI system.
#[derive(Debug, Clone)]
pub struct LtiModel {
    e: OpMatrix,
    a: AffineOperator,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    energy_product: InnerProduct,
}

/// Relative condition threshold below which a projected descriptor counts as
/// singular and the projection as degenerate.
const DESCRIPTOR_COND_TOL: f64 = 1e-13;

impl LtiModel {
    /// Assembles a model after validating shapes.
    ///
    /// `E` must be square of the same order as `A`; invertibility is not
    /// checked here but asserted by the first factorization that uses it.
    pub fn new(
        e: OpMatrix,
        a: AffineOperator,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        energy_product: InnerProduct,
    ) -> Result<Self> {
        let n = a.order();
        if !e.is_square() || e.nrows() != n {
            return Err(Error::dim(
                "descriptor matrix",
                format!("{n} x {n}"),
                format!("{} x {}", e.nrows(), e.ncols()),
            ));
        }
        if b.nrows() != n {
            return Err(Error::dim(
                "input matrix",
                format!("{n} rows"),
                format!("{} rows", b.nrows()),
            ));
        }
        if c.ncols() != n {
            return Err(Error::dim(
                "output matrix",
                format!("{n} columns"),
                format!("{} columns", c.ncols()),
            ));
        }
        if b.iter().any(|v| !v.is_finite()) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("input/output matrices must be finite"));
        }
        energy_product.check_dim(n)?;
        Ok(LtiModel {
            e,
            a,
            b,
            c,
            energy_product,
        })
    }

    pub fn order(&self) -> usize {
        self.a.order()
    }

    pub fn num_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn num_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn num_params(&self) -> usize {
        self.a.num_terms()
    }

    pub fn e(&self) -> &OpMatrix {
        &self.e
    }

    pub fn a(&self) -> &AffineOperator {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn energy_product(&self) -> &InnerProduct {
        &self.energy_product
    }

    /// Evaluates the system operator at `mu`.
    pub fn eval_a(&self, mu: &Parameter) -> Result<OpMatrix> {
        self.a.eval(mu)
    }

    /// Petrov-Galerkin projection onto `basis`: the reduced model has
    /// `E_r = W^T E V`, `A_r,i = W^T A_i V`, `B_r = W^T B`, `C_r = C V`, and
    /// inherits the energy product restricted to the trial space.
    ///
    /// Fails with [`Error::DegenerateProjection`] when the reduced
    /// descriptor is numerically singular.
    pub fn project(&self, basis: &BasisPair) -> Result<LtiModel> {
        let n = self.order();
        if basis.full_order() != n {
            return Err(Error::dim(
                "projection basis",
                format!("model order {n}"),
                format!("basis rows {}", basis.full_order()),
            ));
        }
        let v = basis.v();
        let w = basis.w();
        let r = basis.order();
        let project_one = |m: &OpMatrix| -> DMatrix<f64> { w.transpose() * m.mul_dense(v) };
        let e_r = project_one(&self.e);
        if r > 0 {
            let svd = e_r.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if smax == 0.0 || smin < DESCRIPTOR_COND_TOL * smax {
                return Err(Error::DegenerateProjection { order: r });
            }
        }
        let a_r = AffineOperator::new(
            OpMatrix::Dense(project_one(self.a.constant_term())),
            self.a
                .terms()
                .iter()
                .map(|t| OpMatrix::Dense(project_one(t)))
                .collect(),
        )?;
        let b_r = w.transpose() * &self.b;
        let c_r = &self.c * v;
        let product_r = self.energy_product.restrict(v);
        LtiModel::new(OpMatrix::Dense(e_r), a_r, b_r, c_r, product_r)
    }

    /// Implicit-Euler simulation from `x(0) = 0` on a uniform grid with
    /// `steps` steps of size `t_final / steps`.
    ///
    /// Each step solves `(E - dt A(mu)) x_k = E x_{k-1} + dt B u_k` with the
    /// input evaluated at the end of the step; the operator is factored
    /// once. The returned trajectory includes the initial state.
    pub fn simulate(
        &self,
        mu: &Parameter,
        input: &InputSignal,
        t_final: f64,
        steps: usize,
    ) -> Result<Trajectory> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::invalid(format!("final time {t_final} must be positive")));
        }
        if steps == 0 {
            return Err(Error::invalid("simulation needs at least one step"));
        }
        if let InputSignal::Samples(v) = input {
            if v.len() != steps {
                return Err(Error::dim(
                    "sampled input signal",
                    format!("{steps} steps"),
                    format!("{} samples", v.len()),
                ));
            }
            if v.iter().any(|s| !s.is_finite()) {
                return Err(Error::invalid("input samples must be finite"));
            }
        }
        let n = self.order();
        let dt = t_final / steps as f64;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        let mut states = DMatrix::zeros(n, steps + 1);
        let mut outputs = DMatrix::zeros(self.num_outputs(), steps + 1);
        if n == 0 {
            return Ok(Trajectory { times, states, outputs });
        }
        let a_mu = self.a.eval(mu)?;
        let stepper = op::factor_real(1.0, &self.e, -dt, &a_mu)?;
        // B column sum scaled by the scalar input: all channels share u(t)
        let b_sum: DVector<f64> = {
            let mut s = DVector::zeros(n);
            for j in 0..self.b.ncols() {
                s += self.b.column(j);
            }
            s
        };
        let mut x = DVector::<f64>::zeros(n);
        for k in 1..=steps {
            let u = input.value_at(k);
            let mut rhs = self.e.matvec(&x);
            rhs.axpy(dt * u, &b_sum, 1.0);
            x = stepper.solve_vec(&rhs)?;
            states.set_column(k, &x);
        }
        for k in 0..=steps {
            let y = &self.c * states.column(k);
            outputs.set_column(k, &y);
        }
        Ok(Trajectory { times, states, outputs })
    }

    /// Transfer function `H(s) = C (s E - A(mu))^-1 B` at one point.
    ///
    /// Costs one factorization plus one solve per input column; real `s`
    /// stays on the real path. Evaluating at a pole surfaces as
    /// [`Error::Singular`].
    pub fn transfer(&self, mu: &Parameter, s: Complex<f64>) -> Result<DMatrix<Complex<f64>>> {
        let a_mu = self.a.eval(mu)?;
        let n = self.order();
        if s.im == 0.0 {
            let f = op::factor_real(s.re, &self.e, -1.0, &a_mu)?;
            let mut x = self.b.clone();
            f.solve_in_place(&mut x)?;
            let h = &self.c * x;
            Ok(h.map(|v| Complex::new(v, 0.0)))
        } else {
            let f = op::factor_complex(s, &self.e, Complex::new(-1.0, 0.0), &a_mu)?;
            let mut x = DMatrix::from_fn(n, self.b.ncols(), |i, j| {
                Complex::new(self.b[(i, j)], 0.0)
            });
            f.solve_in_place(&mut x)?;
            let cc = self.c.map(|v| Complex::new(v, 0.0));
            Ok(cc * x)
        }
    }

    /// Generalized eigenvalues of the pencil `(A(mu), E)`, sorted by real
    /// part, then imaginary part. Dense computation, so the model order must
    /// not exceed [`linalg::SMALL_PROBLEM_LIMIT`].
    pub fn poles(&self, mu: &Parameter) -> Result<Vec<Complex<f64>>> {
        if self.order() > linalg::SMALL_PROBLEM_LIMIT {
            return Err(Error::UnsupportedSize {
                context: "pole computation",
                size: self.order(),
                limit: linalg::SMALL_PROBLEM_LIMIT,
            });
        }
        let a_mu = self.a.eval(mu)?.to_dense();
        let e = self.e.to_dense();
        let ge = linalg::small_generalized_eig(&a_mu, &e)?;
        let mut poles = ge.values;
        poles.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        Ok(poles)
    }

    /// Assembles the error system between this model (evaluated at `mu`) and
    /// a reduced model: block-diagonal `E` and `A`, stacked inputs, and the
    /// output difference `y - y_r`. The result is non-parametric.
    ///
    /// The reduced model must either share this model's parametric structure
    /// or be non-parametric itself.
    pub fn error_system(&self, mu: &Parameter, rom: &LtiModel) -> Result<LtiModel> {
        if rom.num_inputs() != self.num_inputs() || rom.num_outputs() != self.num_outputs() {
            return Err(Error::dim(
                "error system",
                format!("{} inputs / {} outputs", self.num_inputs(), self.num_outputs()),
                format!("{} inputs / {} outputs", rom.num_inputs(), rom.num_outputs()),
            ));
        }
        let a_f = self.a.eval(mu)?;
        let a_r = if rom.num_params() == self.num_params() {
            rom.a.eval(mu)?
        } else if rom.num_params() == 0 {
            rom.a.eval(&Parameter::empty())?
        } else {
            return Err(Error::dim(
                "error system parameters",
                format!("{} terms", self.num_params()),
                format!("{} terms", rom.num_params()),
            ));
        };
        let e_blk = CsrMatrix::block_diag(&[&self.e.to_csr(), &rom.e.to_csr()]);
        let a_blk = CsrMatrix::block_diag(&[&a_f.to_csr(), &a_r.to_csr()]);
        let n = self.order();
        let r = rom.order();
        let mut b = DMatrix::zeros(n + r, self.num_inputs());
        b.view_mut((0, 0), (n, self.num_inputs())).copy_from(&self.b);
        b.view_mut((n, 0), (r, self.num_inputs())).copy_from(&rom.b);
        let mut c = DMatrix::zeros(self.num_outputs(), n + r);
        c.view_mut((0, 0), (self.num_outputs(), n)).copy_from(&self.c);
        c.view_mut((0, n), (self.num_outputs(), r))
            .copy_from(&(-&rom.c));
        LtiModel::new(
            OpMatrix::Sparse(e_blk),
            AffineOperator::constant(OpMatrix::Sparse(a_blk)),
            b,
            c,
            InnerProduct::Identity,
        )
    }
}
