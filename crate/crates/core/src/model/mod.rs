//! The fusion classifier: patch-embedded image tokens plus a class token run
//! through a transformer encoder, metadata slots embedded into the same
//! latent width, both fused by one multi-head self-attention layer with a
//! residual connection, and a small batch-normalized head on the fused class
//! token.

mod checkpoint;
mod forward;
mod params;
mod trace;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CKPT_MAGIC};
pub use forward::{
    embed_metadata, encode_samples, encoder_layer, forward_batch, fuse, multi_head_attention,
    patchify, unpatchify, EncodedSample, ForwardOutput, Mode,
};
pub use params::{
    bind, AttentionParams, AttentionVars, BatchNormParams, BoundParams, EncoderLayerParams,
    EncoderLayerVars, HeadParams, LayerNormParams, LayerNormVars, LinearParams, LinearVars,
    ParamGroup, ParamVars, VitAttParams,
};
pub use trace::{AttentionRecord, ForwardTrace};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Hyperparameters fixing every weight shape in the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Side length of the (square) input image in pixels.
    pub image_size: usize,
    /// Side length of one square patch; must divide `image_size`.
    pub patch_size: usize,
    /// Image channels.
    pub channels: usize,
    /// Latent width d shared by image tokens, metadata tokens, and the class
    /// token; must be divisible by `num_heads`.
    pub embed_dim: usize,
    /// Encoder depth.
    pub num_layers: usize,
    /// Attention heads, reused by the fusion layer.
    pub num_heads: usize,
    /// Hidden width of the per-layer MLP.
    pub mlp_hidden: usize,
    /// Hidden width of the classification head.
    pub head_hidden: usize,
    /// Number of metadata tokens M.
    pub num_metadata_slots: usize,
    /// Encoded width w of each metadata slot.
    pub metadata_width: usize,
    pub num_classes: usize,
    /// Skip metadata embedding and fusion; classify from the encoder's class
    /// token directly.
    pub image_only: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || self.patch_size == 0 || self.image_size % self.patch_size != 0 {
            return Err(Error::InvalidConfig(format!(
                "image size {} not divisible by patch size {}",
                self.image_size, self.patch_size
            )));
        }
        if self.embed_dim == 0 || self.num_heads == 0 || self.embed_dim % self.num_heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "embed dim {} not divisible by {} heads",
                self.embed_dim, self.num_heads
            )));
        }
        if self.channels == 0
            || self.num_layers == 0
            || self.mlp_hidden == 0
            || self.head_hidden == 0
            || self.num_classes < 2
        {
            return Err(Error::InvalidConfig(
                "channels, depth, hidden widths must be positive and classes >= 2".into(),
            ));
        }
        if !self.image_only && (self.num_metadata_slots == 0 || self.metadata_width == 0) {
            return Err(Error::InvalidConfig(
                "metadata geometry must be positive unless image_only".into(),
            ));
        }
        Ok(())
    }

    /// Patches per image, P.
    pub fn num_patches(&self) -> usize {
        let g = self.image_size / self.patch_size;
        g * g
    }

    /// Patches per image side.
    pub fn grid(&self) -> usize {
        self.image_size / self.patch_size
    }

    /// Flattened patch length, channels x patch x patch.
    pub fn patch_dim(&self) -> usize {
        self.channels * self.patch_size * self.patch_size
    }

    /// Per-head width d/h.
    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    /// Token count seen by the fusion layer.
    pub fn fused_tokens(&self) -> usize {
        self.num_patches() + 1 + self.num_metadata_slots
    }
}
