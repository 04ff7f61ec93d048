//! Experiment configuration file: model and training sections.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn from_json(source: &str, path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(source).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&source, path)
    }

    /// Checks the fields that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let mut probe = self.model.clone();
        probe.vocab_size = probe.vocab_size.max(2);
        if probe.architecture == crate::model::Architecture::CoattLiwc {
            probe.lexicon_dim = probe.lexicon_dim.max(1);
        }
        probe.validate()
    }
}
