//! Latent-space projection: class-token embeddings from both sides of the
//! fusion layer, t-SNE to 3-D, and a silhouette separation score.

mod silhouette;
mod tsne;

pub use silhouette::separation_score;
pub use tsne::{affinity_matrix, tsne_3d, TsneConfig, TsneResult};

use crate::error::Result;
use crate::model::{
    bind, forward_batch, EncodedSample, Mode, ModelConfig, VitAttParams,
};
use crate::tensor::Tape;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    PreFusion,
    PostFusion,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::PreFusion => write!(f, "pre_fusion"),
            Stage::PostFusion => write!(f, "post_fusion"),
        }
    }
}

/// Class-token embeddings for a sample set at one stage.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    pub stage: Stage,
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub ids: Vec<String>,
}

/// Capture the class-token row right before and right after the fusion
/// layer for every sample.
pub fn collect_embeddings(
    config: &ModelConfig,
    params: &VitAttParams,
    set: &[EncodedSample],
) -> Result<(EmbeddingSet, EmbeddingSet)> {
    let mut pre = EmbeddingSet {
        stage: Stage::PreFusion,
        vectors: Vec::with_capacity(set.len()),
        labels: Vec::with_capacity(set.len()),
        ids: Vec::with_capacity(set.len()),
    };
    let mut post = EmbeddingSet {
        stage: Stage::PostFusion,
        vectors: Vec::with_capacity(set.len()),
        labels: Vec::with_capacity(set.len()),
        ids: Vec::with_capacity(set.len()),
    };
    for chunk in set.chunks(64) {
        let mut tape = Tape::new();
        let bound = bind(&mut tape, params);
        let refs: Vec<&EncodedSample> = chunk.iter().collect();
        let out = forward_batch(
            &mut tape,
            &bound.vars,
            config,
            &params.head.bn.running_mean,
            &params.head.bn.running_var,
            &refs,
            Mode::Eval,
            false,
        )?;
        for (sample, trace) in chunk.iter().zip(out.traces) {
            pre.vectors.push(trace.pre_fusion_class);
            pre.labels.push(sample.label);
            pre.ids.push(sample.id.clone());
            post.vectors.push(trace.post_fusion_class);
            post.labels.push(sample.label);
            post.ids.push(sample.id.clone());
        }
    }
    Ok((pre, post))
}
