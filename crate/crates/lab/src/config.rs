//! TOML experiment configuration.
//!
//! Every table rejects unknown keys. Relative paths are resolved against the
//! directory that holds the config file.

use std::path::{Path, PathBuf};

use kdiff_core::analytic::{DimensionPair, Spectrum};
use kdiff_core::geometry::{random_orthonormal_basis, ColoredCovariance, DataSource};
use kdiff_core::kdiff::{LossMode, LrSchedule, Optimizer, TrainConfig, DEFAULT_CLAMP_FLOOR};
use kdiff_core::rng::stream;
use kdiff_core::sampler::Solver;
use kdiff_core::schedule::{
    LossTargetSpec, Objective, ProcessSpec, TargetSpec, TimeMeasure, TimeSampler,
};
use serde::Deserialize;

use crate::LabError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub process: ProcessKind,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub loss: LossKind,
    #[serde(default)]
    pub time_sampler: TimeSamplerConfig,
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub theory: TheoryConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub sample: SampleConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_interval() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    #[default]
    FlowMatching,
    /// α = sin(πt/2), σ = cos(πt/2).
    Trigonometric,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    #[default]
    K,
    Epsilon,
    X,
    V,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    #[serde(default)]
    pub kind: TargetKind,
    #[serde(default = "half")]
    pub k: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            kind: TargetKind::K,
            k: 0.5,
        }
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    U,
    X,
    Eps,
    V,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(try_from = "RawTimeSampler")]
pub enum TimeSamplerConfig {
    #[default]
    Uniform,
    LogitNormal {
        mu: f64,
        sigma: f64,
    },
}

// Internally tagged unit variants would silently accept stray keys, so the
// table is read flat and checked by hand.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTimeSampler {
    kind: String,
    mu: Option<f64>,
    sigma: Option<f64>,
}

impl TryFrom<RawTimeSampler> for TimeSamplerConfig {
    type Error = String;

    fn try_from(raw: RawTimeSampler) -> Result<Self, String> {
        match (raw.kind.as_str(), raw.mu, raw.sigma) {
            ("uniform", None, None) => Ok(TimeSamplerConfig::Uniform),
            ("uniform", _, _) => Err("uniform time sampler takes no mu or sigma".into()),
            ("logit_normal", Some(mu), Some(sigma)) => {
                Ok(TimeSamplerConfig::LogitNormal { mu, sigma })
            }
            ("logit_normal", _, _) => Err("logit_normal time sampler needs mu and sigma".into()),
            (other, _, _) => Err(format!("unknown time sampler kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(rename = "D", default = "default_ambient")]
    pub ambient: usize,
    #[serde(rename = "d", default = "default_intrinsic")]
    pub intrinsic: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Eigenvalues of the data covariance; selects the colored sampler.
    #[serde(default)]
    pub spectrum: Option<Vec<f64>>,
}

fn default_ambient() -> usize {
    16
}

fn default_intrinsic() -> usize {
    4
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            ambient: default_ambient(),
            intrinsic: default_intrinsic(),
            seed: None,
            spectrum: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    /// Points of the uniform k grid on [0, 1].
    #[serde(default = "default_k_points")]
    pub k_points: usize,
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
}

fn default_k_points() -> usize {
    101
}

fn default_quad_nodes() -> usize {
    64
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            k_points: default_k_points(),
            quad_nodes: default_quad_nodes(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    Zeros,
    /// Entries drawn i.i.d. from N(0, 1/D).
    Random,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientKind {
    #[default]
    Exact,
    Stochastic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default = "half")]
    pub step_size: f64,
    #[serde(default = "default_dynamics_steps")]
    pub steps: usize,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default)]
    pub gradient: GradientKind,
    #[serde(default = "default_dynamics_batch")]
    pub batch: usize,
    /// Both mode distances must end below this.
    #[serde(default = "default_dynamics_tol")]
    pub tolerance: f64,
}

fn default_dynamics_steps() -> usize {
    200
}

fn default_dynamics_batch() -> usize {
    256
}

fn default_dynamics_tol() -> f64 {
    1e-6
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            steps: default_dynamics_steps(),
            init: InitKind::Zeros,
            gradient: GradientKind::Exact,
            batch: default_dynamics_batch(),
            tolerance: default_dynamics_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub enum ScheduleConfig {
    #[default]
    Constant,
    LinearDecay {
        final_fraction: f64,
    },
    InverseTime {
        half_life: f64,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    kind: String,
    final_fraction: Option<f64>,
    half_life: Option<f64>,
}

impl TryFrom<RawSchedule> for ScheduleConfig {
    type Error = String;

    fn try_from(raw: RawSchedule) -> Result<Self, String> {
        match (raw.kind.as_str(), raw.final_fraction, raw.half_life) {
            ("constant", None, None) => Ok(ScheduleConfig::Constant),
            ("linear_decay", Some(final_fraction), None) => {
                Ok(ScheduleConfig::LinearDecay { final_fraction })
            }
            ("inverse_time", None, Some(half_life)) => {
                Ok(ScheduleConfig::InverseTime { half_life })
            }
            ("constant" | "linear_decay" | "inverse_time", _, _) => Err(format!(
                "wrong parameters for learning-rate schedule `{}`",
                raw.kind
            )),
            (other, _, _) => Err(format!("unknown learning-rate schedule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossModeKind {
    #[default]
    ULoss,
    VLoss,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetKind {
    #[default]
    PureLinear,
    TwoLayer,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub eps: f64,
    #[serde(default)]
    pub lr_schedule: ScheduleConfig,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_train_steps")]
    pub steps: usize,
    #[serde(default = "half")]
    pub k_init: f64,
    #[serde(default = "yes")]
    pub k_trainable: bool,
    /// Number of time bins; absent means a single constant k.
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default)]
    pub loss_mode: LossModeKind,
    #[serde(default)]
    pub net: NetKind,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_floor")]
    pub clamp_floor: f64,
    #[serde(default)]
    pub stop_grad_target: bool,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// Allowed |final k − k*| for the summary check.
    #[serde(default = "default_k_tol")]
    pub k_tolerance: f64,
}

fn default_lr() -> f64 {
    1e-2
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.95
}

fn default_adam_eps() -> f64 {
    1e-8
}

fn default_batch() -> usize {
    256
}

fn default_train_steps() -> usize {
    20_000
}

fn yes() -> bool {
    true
}

fn default_hidden() -> usize {
    32
}

fn default_floor() -> f64 {
    DEFAULT_CLAMP_FLOOR
}

fn default_log_every() -> usize {
    100
}

fn default_k_tol() -> f64 {
    0.03
}

impl Default for TrainSection {
    fn default() -> Self {
        toml::from_str("").expect("empty train table uses defaults")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Euler,
    Heun,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleNet {
    /// Pure linear u-predictor at the equilibrium weight for `target.k`.
    #[default]
    OptimalLinear,
    /// Trains with the `[train]` table first.
    Trained,
    /// Velocity `(x − z)/(1 − t)` towards data points drawn up front.
    Oracle,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(default = "default_sample_steps")]
    pub steps: usize,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub net: SampleNet,
}

fn default_sample_steps() -> usize {
    50
}

fn default_n_samples() -> usize {
    1000
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            steps: default_sample_steps(),
            solver: SolverKind::Euler,
            n_samples: default_n_samples(),
            net: SampleNet::OptimalLinear,
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` and resolves `output_dir` against the file's directory.
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| LabError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if cfg.output_dir.is_relative() {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config {
            path: PathBuf::from("<string>"),
            message: e.to_string(),
        })
    }

    /// Seed for data geometry; falls back to the global seed.
    pub fn data_seed(&self) -> u64 {
        self.data.seed.unwrap_or(self.seed)
    }

    pub fn dims(&self) -> Result<DimensionPair, LabError> {
        Ok(DimensionPair::new(self.data.ambient, self.intrinsic_dim())?)
    }

    fn intrinsic_dim(&self) -> usize {
        match &self.data.spectrum {
            Some(s) => s.iter().filter(|l| **l > 0.0).count().max(1),
            None => self.data.intrinsic,
        }
    }

    pub fn spectrum(&self) -> Result<Option<Spectrum>, LabError> {
        match &self.data.spectrum {
            None => Ok(None),
            Some(values) => {
                if values.len() != self.data.ambient {
                    return Err(LabError::invalid(format!(
                        "data.spectrum has {} entries but data.D = {}",
                        values.len(),
                        self.data.ambient
                    )));
                }
                Ok(Some(Spectrum::new(values.clone())?))
            }
        }
    }

    pub fn measure(&self) -> Result<TimeMeasure, LabError> {
        let sampler = match self.time_sampler {
            TimeSamplerConfig::Uniform => TimeSampler::Uniform,
            TimeSamplerConfig::LogitNormal { mu, sigma } => TimeSampler::LogitNormal { mu, sigma },
        };
        Ok(TimeMeasure::new(
            sampler,
            self.interval[0],
            self.interval[1],
        )?)
    }

    pub fn process(&self) -> ProcessSpec {
        match self.process {
            ProcessKind::FlowMatching => ProcessSpec::FlowMatching,
            ProcessKind::Trigonometric => ProcessSpec::custom(
                |t| (std::f64::consts::FRAC_PI_2 * t).sin(),
                |t| (std::f64::consts::FRAC_PI_2 * t).cos(),
            ),
        }
    }

    pub fn target_spec(&self) -> Result<TargetSpec, LabError> {
        Ok(match self.target.kind {
            TargetKind::K => TargetSpec::k_target(self.target.k)?,
            TargetKind::Epsilon => TargetSpec::Epsilon,
            TargetKind::X => TargetSpec::X,
            TargetKind::V => TargetSpec::V,
        })
    }

    pub fn loss_spec(&self) -> LossTargetSpec {
        match self.loss {
            LossKind::U => LossTargetSpec::U,
            LossKind::X => LossTargetSpec::X,
            LossKind::Eps => LossTargetSpec::Eps,
            LossKind::V => LossTargetSpec::V,
        }
    }

    /// Objective with the configured target.
    pub fn objective(&self) -> Result<Objective, LabError> {
        self.objective_for(self.target_spec()?)
    }

    pub fn objective_for(&self, target: TargetSpec) -> Result<Objective, LabError> {
        Ok(Objective {
            process: self.process(),
            target,
            loss: self.loss_spec(),
            measure: self.measure()?,
            kappa_floor: None,
        })
    }

    /// Colored when a spectrum is configured, otherwise a random manifold.
    pub fn data_source(&self) -> Result<DataSource, LabError> {
        let mut rng = stream(self.data_seed(), "lab.data.geometry");
        match self.spectrum()? {
            Some(s) => Ok(DataSource::Colored(ColoredCovariance::random_rotation(
                s.eigenvalues().to_vec(),
                &mut rng,
            )?)),
            None => {
                let dims = self.dims()?;
                Ok(DataSource::Manifold(random_orthonormal_basis(
                    dims.ambient(),
                    dims.intrinsic(),
                    &mut rng,
                )?))
            }
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, LabError> {
        let t = &self.train;
        let optimizer = match t.optimizer {
            OptimizerKind::Adam => Optimizer::Adam {
                lr: t.lr,
                beta1: t.beta1,
                beta2: t.beta2,
                eps: t.eps,
            },
            OptimizerKind::Sgd => Optimizer::Sgd { lr: t.lr },
        };
        let lr_schedule = match t.lr_schedule {
            ScheduleConfig::Constant => LrSchedule::Constant,
            ScheduleConfig::LinearDecay { final_fraction } => {
                LrSchedule::LinearDecay { final_fraction }
            }
            ScheduleConfig::InverseTime { half_life } => LrSchedule::InverseTime { half_life },
        };
        let cfg = TrainConfig {
            loss_mode: match t.loss_mode {
                LossModeKind::ULoss => LossMode::ULoss,
                LossModeKind::VLoss => LossMode::VLossAlg1,
            },
            optimizer,
            lr_schedule,
            batch: t.batch,
            steps: t.steps,
            seed: self.seed,
            clamp_floor: t.clamp_floor,
            k_trainable: t.k_trainable,
            k_init: t.k_init,
            stop_grad_target: t.stop_grad_target,
            measure: self.measure()?,
            log_every: t.log_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solver(&self) -> Solver {
        match self.sample.solver {
            SolverKind::Euler => Solver::Euler,
            SolverKind::Heun => Solver::Heun,
        }
    }
}
