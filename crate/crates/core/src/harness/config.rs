//! Experiment configuration, read from TOML.
//!
//! Every section is optional and falls back to the defaults below. Unknown
//! keys are rejected so typos surface as validation errors.

use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::arm::InterceptionPolicy;
use crate::blackbox::TrainConfig;
use crate::error::{Error, Result};
use crate::greybox::GreyboxParams;
use crate::optimizer::{FeasibleSet, RunConfig, StepSchedule};
use crate::sim_env::EnvConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    GradCheck,
    BaselineVariance,
    GenData,
    TrainBlackbox,
    Run,
    Sweep,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::GradCheck => "grad-check",
            Mode::BaselineVariance => "baseline-variance",
            Mode::GenData => "gen-data",
            Mode::TrainBlackbox => "train-blackbox",
            Mode::Run => "run",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    #[default]
    Greybox,
    Blackbox,
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greybox" => Ok(Self::Greybox),
            "blackbox" => Ok(Self::Blackbox),
            other => Err(Error::InvalidConfig(format!("unknown predictor {other:?} (expected greybox or blackbox)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    #[default]
    Uniform,
    Grid,
}

/// Who labels generated policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    /// Noisy observations from the simulated environment.
    #[default]
    Env,
    /// Noiseless grey-box predictions on the nominal incoming ball.
    Greybox,
}

/// Policy sampling for datasets and gradient checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n: usize,
    pub sampling: Sampling,
    /// Points per axis for grid sampling, `theta1` first.
    pub grid: [usize; 2],
    pub theta1_range: [f64; 2],
    pub theta4_range: [f64; 2],
    pub source: LabelSource,
    /// Uniform sampling gives up once misses exceed this fraction.
    pub max_miss_rate: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n: 3000,
            sampling: Sampling::Uniform,
            grid: [10, 10],
            theta1_range: [-0.3, 0.6],
            theta4_range: [-0.2, 0.35],
            source: LabelSource::Env,
            max_miss_rate: 0.9,
        }
    }
}

impl DataConfig {
    pub fn sampling_box(&self) -> Result<FeasibleSet> {
        FeasibleSet::new(self.theta1_range, self.theta4_range)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlackboxConfig {
    /// Load this model instead of training one.
    pub model: Option<PathBuf>,
    /// Train on this dataset instead of generating one.
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub policies: Vec<InterceptionPolicy>,
    pub trials: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            policies: vec![
                InterceptionPolicy::new(0.15, 0.1),
                InterceptionPolicy::new(0.0, 0.2),
                InterceptionPolicy::new(0.3, 0.15),
            ],
            trials: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub n_points: usize,
    pub fd_step: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { n_points: 100, fd_step: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Every target from the same initial policy.
    #[default]
    Targets,
    /// Every initial policy towards the same target.
    Inits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub targets: Vec<Vector2<f64>>,
    pub inits: Vec<InterceptionPolicy>,
    pub replicates: usize,
    /// Iteration whose landings are averaged per initial policy.
    pub report_iter: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kind: SweepKind::Targets,
            targets: vec![
                Vector2::new(-0.4, 2.2),
                Vector2::new(0.0, 2.2),
                Vector2::new(0.4, 2.2),
                Vector2::new(-0.4, 2.5),
                Vector2::new(0.0, 2.5),
                Vector2::new(0.4, 2.5),
            ],
            inits: vec![
                InterceptionPolicy::new(0.0, 0.2),
                InterceptionPolicy::new(0.3, 0.2),
                InterceptionPolicy::new(0.15, 0.05),
                InterceptionPolicy::new(0.15, 0.35),
                InterceptionPolicy::new(0.35, 0.0),
                InterceptionPolicy::new(0.25, 0.3),
            ],
            replicates: 5,
            report_iter: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Set by the CLI subcommand when absent.
    pub mode: Option<Mode>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub predictor: PredictorKind,
    pub target: Vector2<f64>,
    pub phi1: InterceptionPolicy,
    pub n_iters: usize,
    pub alpha1: f64,
    pub max_consecutive_misses: usize,
    /// Distance used for the iterations-to-threshold statistic [m].
    pub threshold: f64,
    pub feasible: FeasibleSet,
    pub env: EnvConfig,
    pub greybox: GreyboxParams,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub blackbox: BlackboxConfig,
    pub baseline: BaselineConfig,
    pub grad_check: GradCheckConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: None,
            seed: 0,
            out_dir: PathBuf::from("out"),
            predictor: PredictorKind::Greybox,
            target: Vector2::new(0.0, 2.4),
            phi1: InterceptionPolicy::new(0.15, 0.1),
            n_iters: 200,
            alpha1: 0.05,
            max_consecutive_misses: 20,
            threshold: 0.25,
            feasible: FeasibleSet::default(),
            env: EnvConfig::default(),
            greybox: GreyboxParams::default(),
            data: DataConfig::default(),
            train: TrainConfig::default(),
            blackbox: BlackboxConfig::default(),
            baseline: BaselineConfig::default(),
            grad_check: GradCheckConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("field `{field}`: {msg}"))
}

fn scoped<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidConfig(m) => field_err(field, m),
        other => other,
    })
}

impl ExperimentConfig {
    /// Parses TOML; syntax and type errors carry the line and key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Canonical rendering; this is the text that gets hashed and echoed.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn mode(&self) -> Result<Mode> {
        self.mode.ok_or_else(|| field_err("mode", "no mode given"))
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            target: self.target,
            phi1: self.phi1,
            n_iters: self.n_iters,
            schedule: StepSchedule { alpha1: self.alpha1 },
            k: self.feasible,
            max_consecutive_misses: self.max_consecutive_misses,
        }
    }

    /// Checks the sections the selected mode reads.
    pub fn validate(&self) -> Result<()> {
        let mode = self.mode()?;
        scoped("feasible", self.feasible.validate())?;
        scoped("env", self.env.validate())?;
        scoped("greybox.flight", self.greybox.flight.validate())?;
        scoped("greybox.geom", self.greybox.geom.validate())?;
        if !self.target.iter().all(|x| x.is_finite()) {
            return Err(field_err("target", "must be finite"));
        }
        let needs_model = matches!(mode, Mode::Run | Mode::Sweep) && self.predictor == PredictorKind::Blackbox;
        if matches!(mode, Mode::GenData | Mode::TrainBlackbox | Mode::GradCheck) || needs_model {
            self.validate_data()?;
        }
        if mode == Mode::TrainBlackbox || (needs_model && self.blackbox.model.is_none()) {
            scoped("train", self.train.validate())?;
        }
        match mode {
            Mode::Run | Mode::Sweep => {
                if !(self.threshold > 0.0) {
                    return Err(field_err("threshold", "must be > 0"));
                }
                if !(self.alpha1 > 0.0 && self.alpha1.is_finite()) {
                    return Err(field_err("alpha1", "must be > 0"));
                }
                if self.n_iters < 1 {
                    return Err(field_err("n_iters", "must be >= 1"));
                }
                if self.max_consecutive_misses < 1 {
                    return Err(field_err("max_consecutive_misses", "must be >= 1"));
                }
                if mode == Mode::Run && !self.feasible.contains(&self.phi1) {
                    return Err(field_err("phi1", "must lie inside the feasible set"));
                }
                if mode == Mode::Sweep {
                    self.validate_sweep()?;
                }
            }
            Mode::BaselineVariance => {
                if self.baseline.policies.is_empty() {
                    return Err(field_err("baseline.policies", "must not be empty"));
                }
                if self.baseline.trials < 2 {
                    return Err(field_err("baseline.trials", "must be >= 2"));
                }
            }
            Mode::GradCheck => {
                if self.grad_check.n_points < 1 {
                    return Err(field_err("grad_check.n_points", "must be >= 1"));
                }
                if !(self.grad_check.fd_step > 0.0) {
                    return Err(field_err("grad_check.fd_step", "must be > 0"));
                }
            }
            Mode::GenData | Mode::TrainBlackbox => {}
        }
        Ok(())
    }

    fn validate_data(&self) -> Result<()> {
        let d = &self.data;
        let b = scoped("data", d.sampling_box())?;
        if !(self.feasible.contains(&InterceptionPolicy::from_vector(&b.lower())) && self.feasible.contains(&InterceptionPolicy::from_vector(&b.upper()))) {
            return Err(field_err("data", "sampling ranges must lie inside the feasible set"));
        }
        match d.sampling {
            Sampling::Uniform if d.n < 1 => Err(field_err("data.n", "must be >= 1")),
            Sampling::Grid if d.grid.iter().any(|&g| g < 2) => Err(field_err("data.grid", "needs at least 2 points per axis")),
            _ if !(d.max_miss_rate > 0.0 && d.max_miss_rate < 1.0) => Err(field_err("data.max_miss_rate", "must lie in (0, 1)")),
            _ => Ok(()),
        }
    }

    fn validate_sweep(&self) -> Result<()> {
        let s = &self.sweep;
        if s.replicates < 1 {
            return Err(field_err("sweep.replicates", "must be >= 1"));
        }
        match s.kind {
            SweepKind::Targets if s.targets.is_empty() => Err(field_err("sweep.targets", "must not be empty")),
            SweepKind::Inits if s.inits.is_empty() => Err(field_err("sweep.inits", "must not be empty")),
            SweepKind::Inits if s.report_iter < 1 || s.report_iter > self.n_iters => {
                Err(field_err("sweep.report_iter", "must lie in [1, n_iters]"))
            }
            SweepKind::Inits if s.inits.iter().any(|p| !self.feasible.contains(p)) => {
                Err(field_err("sweep.inits", "every initial policy must lie inside the feasible set"))
            }
            SweepKind::Targets if !self.feasible.contains(&self.phi1) => Err(field_err("phi1", "must lie inside the feasible set")),
            _ => Ok(()),
        }
    }
}
