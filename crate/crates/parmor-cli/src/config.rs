//! Experiment configuration.
//!
//! One TOML document drives every experiment: geometry of the thermal-block
//! full-order model, the methods and reduced orders to sweep, the time grid
//! for snapshot generation, solver knobs, and the parameter sampling plans.
//! [`ExperimentConfig::default`] is the desk-scale setup every study in this
//! repository refers to; `parmor config print-defaults` prints it as a
//! ready-to-edit file.

use std::path::{Path, PathBuf};

use parmor::mateq::{AdiOptions, LyapunovMethod};
use parmor::thermalblock::{OutputMode, ThermalBlockSpec};
use parmor::{Error, Result};
use serde::{Deserialize, Serialize};

/// Reduction methods the driver knows about. The non-parametric sweep runs
/// every enabled method; the parametric experiments use `OsIrka` (always
/// required there, since the matched comparison order is derived from its
/// global basis) plus `Bt` and `Rb` when enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bt,
    Lqgbt,
    Irka,
    OsIrka,
    Pod,
    Rb,
}

impl Method {
    /// Column name in CSV headers.
    pub fn column(self) -> &'static str {
        match self {
            Method::Bt => "bt",
            Method::Lqgbt => "lqgbt",
            Method::Irka => "irka",
            Method::OsIrka => "osirka",
            Method::Pod => "pod",
            Method::Rb => "rb",
        }
    }
}

/// Output functional of the thermal block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    /// One output per block (mean block temperature).
    BlockAverages,
    /// A single output (mean domain temperature).
    DomainAverage,
}

impl From<OutputKind> for OutputMode {
    fn from(kind: OutputKind) -> OutputMode {
        match kind {
            OutputKind::BlockAverages => OutputMode::BlockAverages,
            OutputKind::DomainAverage => OutputMode::DomainAverage,
        }
    }
}

/// Geometry of the full-order model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FomConfig {
    /// Blocks per side (`k`); parameter dimension is `k^2`.
    pub blocks_per_side: usize,
    /// Interior grid nodes per side (`g`); model order is `g^2`.
    pub grid_per_side: usize,
    pub output: OutputKind,
}

impl Default for FomConfig {
    fn default() -> Self {
        FomConfig {
            blocks_per_side: 2,
            grid_per_side: 30,
            output: OutputKind::BlockAverages,
        }
    }
}

impl FomConfig {
    pub fn spec(&self) -> Result<ThermalBlockSpec> {
        ThermalBlockSpec::new(self.blocks_per_side, self.grid_per_side, self.output.into())
    }
}

/// Implicit-Euler time grid used for snapshot generation (POD and the
/// reduced-basis greedy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGrid {
    pub t_final: f64,
    pub steps: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            t_final: 1.0,
            steps: 100,
        }
    }
}

/// Which lane solves the large matrix equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverLane {
    Dense,
    LowRank,
}

/// Low-rank ADI knobs, mirroring [`AdiOptions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdiConfig {
    pub num_shifts: usize,
    pub subspace_dim: usize,
    pub res_tol: f64,
    pub max_iter: usize,
}

impl Default for AdiConfig {
    fn default() -> Self {
        let d = AdiOptions::default();
        AdiConfig {
            num_shifts: d.num_shifts,
            subspace_dim: d.subspace_dim,
            res_tol: d.res_tol,
            max_iter: d.max_iter,
        }
    }
}

impl AdiConfig {
    pub fn options(&self) -> AdiOptions {
        AdiOptions {
            num_shifts: self.num_shifts,
            subspace_dim: self.subspace_dim,
            res_tol: self.res_tol,
            max_iter: self.max_iter,
        }
    }
}

/// Solver lane and iteration tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub lane: SolverLane,
    pub adi: AdiConfig,
    pub irka_max_iter: usize,
    pub irka_tol: f64,
    /// Relative singular-value cutoff when truncating a concatenated global
    /// basis; the realized global orders are recorded in the metadata.
    pub global_rtol: f64,
    /// POD modes added per greedy enrichment when building the RB basis.
    pub rb_modes_per_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lane: SolverLane::Dense,
            adi: AdiConfig::default(),
            irka_max_iter: 100,
            irka_tol: 1e-4,
            global_rtol: 1e-7,
            rb_modes_per_iter: 2,
        }
    }
}

impl SolverConfig {
    pub fn lyapunov_method(&self) -> LyapunovMethod {
        match self.lane {
            SolverLane::Dense => LyapunovMethod::Dense,
            SolverLane::LowRank => LyapunovMethod::LowRank(self.adi.options()),
        }
    }
}

/// Parameter sampling plans for the two parametric experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Training size of the one-parameter study; log-equispaced over
    /// `one_param_range`. Test points are the geometric midpoints.
    pub one_param_training: usize,
    /// `[min, max]` of the one-parameter range, both positive.
    pub one_param_range: [f64; 2],
    /// Training / test sample counts of the four-parameter study.
    pub four_param_training: usize,
    pub four_param_test: usize,
    /// `[lo, hi]` of the uniform exponent box; parameters are `10^e`.
    pub four_param_exponents: [f64; 2],
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            one_param_training: 10,
            one_param_range: [1e-6, 1e2],
            four_param_training: 20,
            four_param_test: 20,
            four_param_exponents: [-6.0, 2.0],
        }
    }
}

/// The complete experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub fom: FomConfig,
    /// Methods included in the sweeps; see [`Method`].
    pub methods: Vec<Method>,
    /// Reduced orders of the non-parametric sweep; strictly increasing.
    pub orders: Vec<usize>,
    /// Order of each local parametric reduced model.
    pub local_order: usize,
    pub time: TimeGrid,
    pub solver: SolverConfig,
    pub sampling: SamplingConfig,
    /// RNG seed; the four-parameter experiment refuses to run without one.
    pub seed: Option<u64>,
    /// Directory receiving CSV files, metadata sidecars, and model caches.
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            fom: FomConfig::default(),
            methods: vec![
                Method::Bt,
                Method::Lqgbt,
                Method::Irka,
                Method::OsIrka,
                Method::Pod,
                Method::Rb,
            ],
            orders: (1..=10).map(|k| 2 * k).collect(),
            local_order: 10,
            time: TimeGrid::default(),
            solver: SolverConfig::default(),
            sampling: SamplingConfig::default(),
            seed: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::invalid(format!("config parse failed: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The defaults as a TOML document.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::invalid(format!("config serialization failed: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.fom.spec()?;
        if self.methods.is_empty() {
            return Err(Error::invalid("at least one method must be enabled"));
        }
        if self.orders.is_empty() {
            return Err(Error::invalid("orders must not be empty"));
        }
        if self.orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("orders must be strictly increasing"));
        }
        let n = self.fom.spec()?.order();
        if *self.orders.last().unwrap() > n {
            return Err(Error::invalid(format!(
                "largest order {} exceeds the model order {n}",
                self.orders.last().unwrap()
            )));
        }
        if self.local_order == 0 || self.local_order > n {
            return Err(Error::invalid(format!(
                "local order {} must lie in 1..={n}",
                self.local_order
            )));
        }
        if !(self.time.t_final > 0.0) || self.time.steps == 0 {
            return Err(Error::invalid("time grid needs t_final > 0 and steps >= 1"));
        }
        if self.solver.irka_max_iter == 0 || !(self.solver.irka_tol > 0.0) {
            return Err(Error::invalid("IRKA needs max_iter >= 1 and tol > 0"));
        }
        if !(self.solver.global_rtol.is_finite() && (0.0..=1.0).contains(&self.solver.global_rtol))
        {
            return Err(Error::invalid("global_rtol must lie in [0, 1]"));
        }
        if self.solver.rb_modes_per_iter == 0 {
            return Err(Error::invalid("rb_modes_per_iter must be >= 1"));
        }
        let s = &self.sampling;
        if s.one_param_training < 2 {
            return Err(Error::invalid("one-parameter training set needs >= 2 points"));
        }
        if !(s.one_param_range[0] > 0.0 && s.one_param_range[1] > s.one_param_range[0]) {
            return Err(Error::invalid(
                "one_param_range must be positive and increasing",
            ));
        }
        if s.four_param_training == 0 || s.four_param_test == 0 {
            return Err(Error::invalid("four-parameter sample counts must be >= 1"));
        }
        if !(s.four_param_exponents[1] > s.four_param_exponents[0]) {
            return Err(Error::invalid("four_param_exponents must be increasing"));
        }
        Ok(())
    }

    pub fn has_method(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }

    /// The non-parametric sweep columns, in canonical order, restricted to
    /// the enabled methods.
    pub fn nonparametric_methods(&self) -> Vec<Method> {
        [
            Method::Bt,
            Method::Lqgbt,
            Method::Irka,
            Method::OsIrka,
            Method::Pod,
        ]
        .into_iter()
        .filter(|m| self.has_method(*m))
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn default_protocol_numbers() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.fom.grid_per_side, 30);
        assert_eq!(cfg.orders, vec![2, 4, 6, 8, 10, 12, 14, 16, 18, 20]);
        assert_eq!(cfg.local_order, 10);
        assert_eq!(cfg.sampling.one_param_training, 10);
        assert_eq!(cfg.sampling.four_param_training, 20);
        assert_eq!(cfg.sampling.four_param_test, 20);
        assert_eq!(cfg.sampling.four_param_exponents, [-6.0, 2.0]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.orders = vec![4, 4];
        assert!(cfg.validate().is_err());
        cfg.orders = vec![2, 1000000];
        assert!(cfg.validate().is_err());
        cfg.orders = vec![2];
        cfg.methods.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let err = toml::from_str::<ExperimentConfig>("no_such_key = 1").unwrap_err();
        assert!(err.to_string().contains("no_such_key"));
    }
}
