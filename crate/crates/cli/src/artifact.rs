use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use uplift_core::model::{TrainConfig, UpliftModel};

pub const FORMAT_VERSION: u32 = 1;

/// A trained model on disk. Contains nothing time- or host-dependent, so
/// retraining with the same inputs reproduces the file exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub train_config: TrainConfig,
    pub train_rows: usize,
    pub model: UpliftModel,
}

impl ModelArtifact {
    pub fn new(model: UpliftModel, train_config: TrainConfig, train_rows: usize) -> Self {
        ModelArtifact {
            format_version: FORMAT_VERSION,
            train_config,
            train_rows,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let artifact: ModelArtifact =
            serde_json::from_str(&text).with_context(|| format!("parsing model artifact {}", path.display()))?;
        if artifact.format_version != FORMAT_VERSION {
            bail!(
                "{}: artifact format {} is not supported (expected {FORMAT_VERSION})",
                path.display(),
                artifact.format_version
            );
        }
        Ok(artifact)
    }
}
