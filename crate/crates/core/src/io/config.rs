use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VcsError};
use crate::gap_tv::GapTvConfig;
use crate::training::TrainConfig;
use crate::unfold_net::ArchConfig;

/// Top-level JSON run configuration; every section is optional and unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub model: ArchConfig,
    pub gap_tv: GapTvConfig,
}

impl RunConfig {
    /// Parses and validates; errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            VcsError::Config(format!("at `{path}`: {}", e.inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| VcsError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.model.validate()?;
        self.gap_tv.validate()?;
        if self.train.mode != self.model.mode {
            return Err(VcsError::Config(format!(
                "train.mode {:?} differs from model.mode {:?}",
                self.train.mode, self.model.mode
            )));
        }
        Ok(())
    }
}
