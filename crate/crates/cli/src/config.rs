//! Run configuration: one JSON file, flag overrides, and a provenance copy
//! written next to the outputs.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use vitatt_core::data::SubsetMode;
use vitatt_core::error::{Error, Result};
use vitatt_core::model::ModelConfig;
use vitatt_core::train::TrainConfig;

/// Architecture knobs the user sets; dataset-derived fields (class count,
/// metadata geometry) are filled in at train time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub image_size: usize,
    pub patch_size: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub mlp_hidden: usize,
    pub head_hidden: usize,
    #[serde(default)]
    pub image_only: bool,
}

fn default_channels() -> usize {
    3
}

impl ModelSpec {
    pub fn to_config(
        &self,
        num_classes: usize,
        num_metadata_slots: usize,
        metadata_width: usize,
    ) -> ModelConfig {
        ModelConfig {
            image_size: self.image_size,
            patch_size: self.patch_size,
            channels: self.channels,
            embed_dim: self.embed_dim,
            num_layers: self.num_layers,
            num_heads: self.num_heads,
            mlp_hidden: self.mlp_hidden,
            head_hidden: self.head_hidden,
            num_metadata_slots,
            metadata_width,
            num_classes,
            image_only: self.image_only,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Train/validation/test fractions, summing to 1.
    pub ratios: Vec<f64>,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: vec![0.5, 0.15, 0.35],
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub metadata_subset: SubsetMode,
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.split.ratios.len() != 3 {
            return Err(Error::InvalidConfig(
                "split.ratios must have exactly three entries (train/val/test)".into(),
            ));
        }
        let sum: f64 = self.split.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split ratios sum to {sum}, expected 1"
            )));
        }
        self.train.validate()?;
        // Architecture constraints that do not need the dataset.
        self.model.to_config(2, 1, 1).validate()?;
        Ok(())
    }

    /// Copy of the resolved configuration, for provenance.
    pub fn write_provenance(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        std::fs::write(out_dir.join("config.json"), text)?;
        Ok(())
    }
}
