//! Declarative run configuration, read from TOML.
//!
//! ```toml
//! dataset = "data/cora"
//! variant = "SL-DSGCN"
//! label_rate = 0.03
//! test_frac = 0.35
//! seeds = [0, 1, 2]
//! output_dir = "runs/cora"
//!
//! [training]
//! lr = 0.01
//! alpha = 1.0
//! beta = 1.0
//! step_mode = "normalized"
//!
//! [training.teacher]
//! prior_std = 1.0
//! samples = 64
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::InfluenceConfig;
use crate::error::{Error, Result};
use crate::pipeline::{TrainingPlan, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub variant: Variant,
    pub label_rate: f64,
    pub test_frac: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub training: TrainingPlan,
    pub influence: InfluenceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: PathBuf::from("data/cora"),
            variant: Variant::SlDsgcn,
            label_rate: 0.03,
            test_frac: 0.35,
            seeds: (0..10).collect(),
            output_dir: PathBuf::from("runs"),
            training: TrainingPlan::default(),
            influence: InfluenceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Training plan for `variant` with every other setting from this config.
    pub fn plan_for(&self, variant: Variant) -> TrainingPlan {
        TrainingPlan {
            variant,
            ..self.training.clone()
        }
    }

    pub fn plan(&self) -> TrainingPlan {
        self.plan_for(self.variant)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.label_rate > 0.0 && self.label_rate < 1.0) {
            return Err(Error::Config(format!("label_rate must lie in (0, 1), got {}", self.label_rate)));
        }
        if !(0.0..1.0).contains(&self.test_frac) {
            return Err(Error::Config(format!("test_frac must lie in [0, 1), got {}", self.test_frac)));
        }
        if self.label_rate + self.test_frac > 1.0 {
            return Err(Error::Config("label_rate + test_frac exceeds 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.influence.trials == 0 || self.influence.repetitions == 0 {
            return Err(Error::Config("influence trials and repetitions must be positive".into()));
        }
        self.plan().validate()
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
