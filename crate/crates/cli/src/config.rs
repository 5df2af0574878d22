//! Experiment configuration (JSON).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spacemap_core::coarse_net::TrainConfig;
use spacemap_core::heat_model::{DataSource, Interval};
use spacemap_core::smo::{AnalyticModel, FineModel, FiniteDifferenceModel, OptimizerConfig, OptimizerKind, SmoConfig};
use spacemap_core::{Grid1D, HeatParams, ParamBounds, Probe, ProbeSet};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSettings,
    pub probes: Vec<ProbeSettings>,
    #[serde(default)]
    pub bounds: BoundsSettings,
    #[serde(default)]
    pub train: TrainSettings,
    pub smo: SmoSettings,
    #[serde(default)]
    pub data: DataSettings,
    pub paths: PathSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub nx: usize,
    pub nt: usize,
    pub x_max: f64,
    pub t_max: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { nx: 41, nt: 100, x_max: 1.0, t_max: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    pub x: f64,
    pub t: f64,
}

/// `[lo, hi]` per parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSettings {
    pub alpha: [f64; 2],
    pub s0: [f64; 2],
    pub k_cond: [f64; 2],
    pub h_coef: [f64; 2],
    pub t_inf: [f64; 2],
}

impl Default for BoundsSettings {
    fn default() -> Self {
        let b = ParamBounds::default().intervals.map(|iv| [iv.lo, iv.hi]);
        Self { alpha: b[0], s0: b[1], k_cond: b[2], h_coef: b[3], t_inf: b[4] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_penalty: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden_layers: 3,
            hidden_width: 20,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            l2_penalty: t.l2_penalty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerChoice {
    NelderMead,
    ConjugateGradient,
}

impl OptimizerChoice {
    pub fn kind(self) -> OptimizerKind {
        match self {
            OptimizerChoice::NelderMead => OptimizerKind::NelderMead,
            OptimizerChoice::ConjugateGradient => OptimizerKind::ConjugateGradient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineChoice {
    Oracle,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingChoice {
    Identity,
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSettings {
    pub alpha: f64,
    pub s0: f64,
    pub k_cond: f64,
    pub h_coef: f64,
    pub t_inf: f64,
}

impl ParamSettings {
    pub fn to_params(self) -> Result<HeatParams> {
        Ok(HeatParams::new(self.alpha, self.s0, self.k_cond, self.h_coef, self.t_inf)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoSettings {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_retrain_epochs")]
    pub retrain_epochs: usize,
    /// Learning rate of the retraining passes; `train.learning_rate` if absent.
    #[serde(default)]
    pub retrain_learning_rate: Option<f64>,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerChoice,
    #[serde(default)]
    pub restarts: usize,
    #[serde(default = "default_fine_model")]
    pub fine_model: FineChoice,
    #[serde(default = "default_mapping")]
    pub mapping: MappingChoice,
    /// Observed temperatures at the probes.
    #[serde(default)]
    pub target: Option<Vec<f64>>,
    /// Hidden parameters whose fine response becomes the target.
    #[serde(default)]
    pub target_params: Option<ParamSettings>,
    #[serde(default)]
    pub start: Option<ParamSettings>,
}

fn default_epsilon() -> f64 {
    1e-3
}
fn default_max_iterations() -> usize {
    25
}
fn default_retrain_epochs() -> usize {
    200
}
fn default_optimizer() -> OptimizerChoice {
    OptimizerChoice::NelderMead
}
fn default_fine_model() -> FineChoice {
    FineChoice::FiniteDifference
}
fn default_mapping() -> MappingChoice {
    MappingChoice::Identity
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceChoice {
    Oracle,
    Fine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSettings {
    pub n_samples: usize,
    pub noise_sigma: f64,
    pub source: SourceChoice,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self { n_samples: 1000, noise_sigma: 0.01, source: SourceChoice::Oracle }
    }
}

/// Output locations. Relative paths are resolved against the config file's
/// directory. `report` is a directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSettings {
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub report: PathBuf,
}

impl ExperimentConfig {
    /// Reads, parses and validates `path`, resolving relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for p in [&mut cfg.paths.dataset, &mut cfg.paths.checkpoint, &mut cfg.paths.report] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.probes()?;
        self.bounds()?;
        self.train_config().validate()?;
        if self.train.hidden_layers == 0 || self.train.hidden_width == 0 {
            return Err(CliError::Config("train.hidden_layers and train.hidden_width must be positive".into()));
        }
        if let Some(lr) = self.smo.retrain_learning_rate {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(CliError::Config("smo.retrain_learning_rate must be positive".into()));
            }
        }
        if self.data.n_samples == 0 {
            return Err(CliError::Config("data.n_samples must be at least 1".into()));
        }
        if !(self.data.noise_sigma.is_finite() && self.data.noise_sigma >= 0.0) {
            return Err(CliError::Config("data.noise_sigma must be finite and non-negative".into()));
        }
        match (&self.smo.target, &self.smo.target_params) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give only one of smo.target and smo.target_params".into()))
            }
            (None, None) => return Err(CliError::Config("one of smo.target or smo.target_params is required".into())),
            _ => {}
        }
        if let Some(t) = &self.smo.target_params {
            t.to_params()?;
        }
        if let Some(s) = &self.smo.start {
            s.to_params()?;
        }
        for (name, p) in
            [("dataset", &self.paths.dataset), ("checkpoint", &self.paths.checkpoint), ("report", &self.paths.report)]
        {
            if p.as_os_str().is_empty() {
                return Err(CliError::Config(format!("paths.{name} must not be empty")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        let g = self.grid;
        Ok(Grid1D::new(g.nx, g.nt, g.x_max, g.t_max)?)
    }

    pub fn probes(&self) -> Result<ProbeSet> {
        let set = ProbeSet::new(self.probes.iter().map(|p| Probe { x: p.x, t: p.t }).collect())?;
        set.check_domain(self.grid.x_max, self.grid.t_max)?;
        Ok(set)
    }

    pub fn bounds(&self) -> Result<ParamBounds> {
        let b = self.bounds;
        Ok(ParamBounds::new([b.alpha, b.s0, b.k_cond, b.h_coef, b.t_inf].map(|[lo, hi]| Interval::new(lo, hi)))?)
    }

    pub fn source(&self) -> DataSource {
        match self.data.source {
            SourceChoice::Oracle => DataSource::Oracle,
            SourceChoice::Fine => DataSource::Fine,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            seed: self.seed,
            l2_penalty: self.train.l2_penalty,
        }
    }

    /// Settings used for the fine-tuning passes inside the loop.
    pub fn retrain_config(&self) -> TrainConfig {
        let base = self.train_config();
        TrainConfig { learning_rate: self.smo.retrain_learning_rate.unwrap_or(base.learning_rate), ..base }
    }

    pub fn fine_model(&self) -> Result<Box<dyn FineModel + Sync>> {
        Ok(match self.smo.fine_model {
            FineChoice::Oracle => Box::new(AnalyticModel),
            FineChoice::FiniteDifference => Box::new(FiniteDifferenceModel { grid: self.grid()? }),
        })
    }

    /// Target response: given directly, or the fine response at `target_params`.
    pub fn target(&self) -> Result<Vec<f64>> {
        let probes = self.probes()?;
        let target = match (&self.smo.target, &self.smo.target_params) {
            (Some(t), _) => t.clone(),
            (None, Some(p)) => self.fine_model()?.response(&p.to_params()?, &probes)?,
            (None, None) => unreachable!("checked by validate"),
        };
        if target.len() != probes.len() {
            return Err(CliError::Config(format!(
                "smo.target has {} values for {} probes",
                target.len(),
                probes.len()
            )));
        }
        Ok(target)
    }

    pub fn smo_config(&self, optimizer: OptimizerKind) -> Result<SmoConfig> {
        let mut opt = OptimizerConfig::new(optimizer);
        opt.restarts = self.smo.restarts;
        let mut cfg = SmoConfig::new(self.target()?);
        cfg.epsilon = self.smo.epsilon;
        cfg.max_iterations = self.smo.max_iterations;
        cfg.retrain_epochs = self.smo.retrain_epochs;
        cfg.optimizer = opt;
        cfg.start = self.smo.start.map(|s| s.to_params()).transpose()?;
        cfg.fit_mapping = self.smo.mapping == MappingChoice::Affine;
        cfg.seed = self.seed;
        cfg.validate(&self.probes()?)?;
        Ok(cfg)
    }

    pub fn loss_path(&self) -> PathBuf {
        self.paths.report.join("loss.csv")
    }
    pub fn history_path(&self) -> PathBuf {
        self.paths.report.join("history.csv")
    }
    pub fn summary_path(&self) -> PathBuf {
        self.paths.report.join("summary.csv")
    }
    pub fn trace_path(&self) -> PathBuf {
        self.paths.report.join("trace.csv")
    }
    pub fn field_path(&self) -> PathBuf {
        self.paths.report.join("field.csv")
    }
    pub fn sweep_path(&self) -> PathBuf {
        self.paths.report.join("sweep.csv")
    }
    pub fn bench_path(&self) -> PathBuf {
        self.paths.report.join("bench.csv")
    }
}
