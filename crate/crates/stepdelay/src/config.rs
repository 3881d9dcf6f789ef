//! Experiment configuration: structured config files with section headers,
//! overridable field by field from the command line.

use crate::data::DatasetKind;
use crate::error::ConfigError;
use crate::model::ModelKind;
use crate::optim::HyperParams;
use crate::runtime::{LocalOptimizer, Strategy};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub hidden: usize,
    pub dataset_kind: DatasetKind,
    pub samples: usize,
    pub dim: usize,
    pub noise: f64,
    pub hp: HyperParams,
    pub strategy: Strategy,
    pub local_optimizer: LocalOptimizer,
    pub servers: u16,
    pub devices_per_worker: usize,
    pub asgd_momentum: bool,
    pub iterations: u64,
    pub eval_interval: u64,
    pub seed: u64,
    pub deterministic: bool,
    pub out_dir: Option<PathBuf>,
    pub profile: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::LogisticRegression,
            hidden: 8,
            dataset_kind: DatasetKind::TwoClass,
            samples: 4096,
            dim: 32,
            noise: 0.05,
            hp: HyperParams::default(),
            strategy: Strategy::Ssgd,
            local_optimizer: LocalOptimizer::Glu,
            servers: 1,
            devices_per_worker: 1,
            asgd_momentum: true,
            iterations: 2000,
            eval_interval: 50,
            seed: 42,
            deterministic: true,
            out_dir: None,
            profile: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.hp.validate()?;
        if self.samples == 0 {
            return Err(ConfigError::field("dataset.samples", "must be >= 1"));
        }
        if self.dim == 0 {
            return Err(ConfigError::field("dataset.dim", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(ConfigError::field("dataset.noise", "must lie in [0, 1]"));
        }
        if self.servers == 0 {
            return Err(ConfigError::field("run.servers", "must be >= 1"));
        }
        if self.iterations == 0 {
            return Err(ConfigError::field("run.iterations", "must be >= 1"));
        }
        if self.eval_interval == 0 {
            return Err(ConfigError::field("run.eval_interval", "must be >= 1"));
        }
        if self.devices_per_worker == 0 {
            return Err(ConfigError::field("run.devices_per_worker", "must be >= 1"));
        }
        if self.hp.batch_size % self.devices_per_worker != 0 {
            return Err(ConfigError::field(
                "run.devices_per_worker",
                format!(
                    "batch_size {} must be divisible by devices {}",
                    self.hp.batch_size, self.devices_per_worker
                ),
            ));
        }
        if self.strategy == Strategy::SsdSgd && self.iterations < self.hp.wp {
            return Err(ConfigError::field(
                "run.iterations",
                format!("must cover the warm-up of {} iterations", self.hp.wp),
            ));
        }
        if self.model == ModelKind::Mlp2 && self.hidden == 0 {
            return Err(ConfigError::field("model.hidden", "must be >= 1 for the MLP"));
        }
        if self.model.is_classifier() != (self.dataset_kind == DatasetKind::TwoClass) {
            return Err(ConfigError::field(
                "dataset.kind",
                format!(
                    "dataset `{}` does not fit model `{}`",
                    self.dataset_kind.name(),
                    self.model.name()
                ),
            ));
        }
        Ok(())
    }
}

// Raw file schema: every field optional so files can be partial and flags
// fill the rest. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    dataset: RawDataset,
    #[serde(default)]
    hyper: RawHyper,
    #[serde(default)]
    run: RawRun,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: Option<String>,
    hidden: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    kind: Option<String>,
    samples: Option<usize>,
    dim: Option<usize>,
    noise: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHyper {
    lr: Option<f64>,
    loc_lr: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    wd: Option<f64>,
    momentum: Option<f64>,
    k: Option<u64>,
    warmup: Option<u64>,
    batch_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    strategy: Option<String>,
    local_optimizer: Option<String>,
    workers: Option<u16>,
    servers: Option<u16>,
    devices_per_worker: Option<usize>,
    asgd_momentum: Option<bool>,
    iterations: Option<u64>,
    eval_interval: Option<u64>,
    seed: Option<u64>,
    deterministic: Option<bool>,
    out: Option<String>,
    profile: Option<String>,
}

/// Loads a config file over the defaults. Flag overrides are applied by the
/// caller afterwards.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut cfg = ExperimentConfig::default();
    apply_raw(&mut cfg, raw)?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_raw(cfg: &mut ExperimentConfig, raw: RawConfig) -> Result<(), ConfigError> {
    if let Some(kind) = raw.model.kind {
        cfg.model = ModelKind::parse(&kind)
            .ok_or_else(|| ConfigError::field("model.kind", format!("unknown model `{kind}`")))?;
    }
    if let Some(h) = raw.model.hidden {
        cfg.hidden = h;
    }
    if let Some(kind) = raw.dataset.kind {
        cfg.dataset_kind = DatasetKind::parse(&kind).ok_or_else(|| {
            ConfigError::field("dataset.kind", format!("unknown dataset `{kind}`"))
        })?;
    }
    if let Some(v) = raw.dataset.samples {
        cfg.samples = v;
    }
    if let Some(v) = raw.dataset.dim {
        cfg.dim = v;
    }
    if let Some(v) = raw.dataset.noise {
        cfg.noise = v;
    }
    if let Some(v) = raw.hyper.lr {
        cfg.hp.lr = v;
    }
    if let Some(v) = raw.hyper.loc_lr {
        cfg.hp.loc_lr = v;
    }
    if let Some(v) = raw.hyper.alpha {
        cfg.hp.alpha = v;
    }
    if let Some(v) = raw.hyper.beta {
        cfg.hp.beta = v;
    }
    if let Some(v) = raw.hyper.wd {
        cfg.hp.wd = v;
    }
    if let Some(v) = raw.hyper.momentum {
        cfg.hp.momentum = v;
    }
    if let Some(v) = raw.hyper.k {
        cfg.hp.k = v;
    }
    if let Some(v) = raw.hyper.warmup {
        cfg.hp.wp = v;
    }
    if let Some(v) = raw.hyper.batch_size {
        cfg.hp.batch_size = v;
    }
    if let Some(s) = raw.run.strategy {
        cfg.strategy = Strategy::parse(&s)
            .ok_or_else(|| ConfigError::field("run.strategy", format!("unknown strategy `{s}`")))?;
    }
    if let Some(s) = raw.run.local_optimizer {
        cfg.local_optimizer = LocalOptimizer::parse(&s).ok_or_else(|| {
            ConfigError::field("run.local_optimizer", format!("unknown optimizer `{s}`"))
        })?;
    }
    if let Some(v) = raw.run.workers {
        cfg.hp.workers = v;
    }
    if let Some(v) = raw.run.servers {
        cfg.servers = v;
    }
    if let Some(v) = raw.run.devices_per_worker {
        cfg.devices_per_worker = v;
    }
    if let Some(v) = raw.run.asgd_momentum {
        cfg.asgd_momentum = v;
    }
    if let Some(v) = raw.run.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = raw.run.eval_interval {
        cfg.eval_interval = v;
    }
    if let Some(v) = raw.run.seed {
        cfg.seed = v;
    }
    if let Some(v) = raw.run.deterministic {
        cfg.deterministic = v;
    }
    if let Some(v) = raw.run.out {
        cfg.out_dir = Some(PathBuf::from(v));
    }
    if let Some(v) = raw.run.profile {
        cfg.profile = Some(PathBuf::from(v));
    }
    Ok(())
}

/// Largest warm-up length not exceeding `wp` that satisfies the pull-cadence
/// constraint for `k`; when `wp` is too small, the smallest valid length.
pub fn compatible_warmup(wp: u64, k: u64) -> u64 {
    let rem = (wp + 1) % k;
    if rem == 0 {
        wp
    } else if wp >= rem {
        wp - rem
    } else {
        k - 1
    }
}
