//! Forward pass of the fusion model.

use super::params::{AttentionVars, LinearVars, ParamVars};
use super::trace::{AttentionRecord, ForwardTrace};
use super::ModelConfig;
use crate::data::{encode_metadata, MetadataSchema, Sample};
use crate::error::{Error, Result};
use crate::tensor::{BatchStats, Tape, Tensor, Var};

const LN_EPS: f64 = 1e-5;
const BN_EPS: f64 = 1e-5;

/// Whether the classification head normalizes with batch or running
/// statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A sample reduced to the tensors the model consumes.
#[derive(Debug, Clone)]
pub struct EncodedSample {
    pub id: String,
    pub label: usize,
    /// Flattened non-overlapping patches, `P x (ch*patch^2)`.
    pub patches: Tensor,
    /// Encoded metadata slots, `M x w`.
    pub metadata: Tensor,
}

/// Split a `[ch, H, W]` image into flattened non-overlapping patches in
/// row-major patch order. Row `p` holds patch `p` as `ch` contiguous
/// `patch*patch` blocks, so concatenating rows in order recovers the image.
pub fn patchify(image: &Tensor, patch_size: usize) -> Result<Tensor> {
    let (ch, h, w) = match image.shape()[..] {
        [c, h, w] => (c, h, w),
        _ => {
            return Err(Error::ShapeMismatch {
                op: "patchify",
                lhs: image.shape().to_vec(),
                rhs: vec![],
            })
        }
    };
    if h != w || patch_size == 0 || h % patch_size != 0 {
        return Err(Error::InvalidConfig(format!(
            "patchify: image {h}x{w} not divisible into {patch_size}-pixel square patches"
        )));
    }
    let grid = h / patch_size;
    let patches = grid * grid;
    let dim = ch * patch_size * patch_size;
    let src = image.data();
    let mut out = vec![0.0; patches * dim];
    for py in 0..grid {
        for px in 0..grid {
            let p = py * grid + px;
            for c in 0..ch {
                for dy in 0..patch_size {
                    let src_off = c * h * w + (py * patch_size + dy) * w + px * patch_size;
                    let dst_off =
                        p * dim + c * patch_size * patch_size + dy * patch_size;
                    out[dst_off..dst_off + patch_size]
                        .copy_from_slice(&src[src_off..src_off + patch_size]);
                }
            }
        }
    }
    Tensor::new(vec![patches, dim], out)
}

/// Inverse of [`patchify`].
pub fn unpatchify(patches: &Tensor, channels: usize, patch_size: usize) -> Result<Tensor> {
    let (p, dim) = match patches.shape()[..] {
        [p, d] => (p, d),
        _ => {
            return Err(Error::ShapeMismatch {
                op: "unpatchify",
                lhs: patches.shape().to_vec(),
                rhs: vec![],
            })
        }
    };
    let grid = (p as f64).sqrt().round() as usize;
    if grid * grid != p || dim != channels * patch_size * patch_size {
        return Err(Error::InvalidConfig(
            "unpatchify: geometry does not describe a square patch grid".into(),
        ));
    }
    let side = grid * patch_size;
    let src = patches.data();
    let mut out = vec![0.0; channels * side * side];
    for py in 0..grid {
        for px in 0..grid {
            let idx = py * grid + px;
            for c in 0..channels {
                for dy in 0..patch_size {
                    let dst_off = c * side * side + (py * patch_size + dy) * side + px * patch_size;
                    let src_off = idx * dim + c * patch_size * patch_size + dy * patch_size;
                    out[dst_off..dst_off + patch_size]
                        .copy_from_slice(&src[src_off..src_off + patch_size]);
                }
            }
        }
    }
    Tensor::new(vec![channels, side, side], out)
}

fn linear(tape: &mut Tape, x: Var, l: &LinearVars) -> Result<Var> {
    let y = tape.matmul(x, l.weight)?;
    tape.add_row(y, l.bias)
}

/// Scaled dot-product self-attention over `x[T x d]`, h heads concatenated
/// and projected. Returns the output and the per-head attention maps.
pub fn multi_head_attention(
    tape: &mut Tape,
    x: Var,
    weights: &AttentionVars,
    heads: usize,
) -> Result<(Var, Vec<Var>)> {
    let d = tape.shape(x)[1];
    let dh = d / heads;
    let q = linear(tape, x, &weights.wq)?;
    let k = linear(tape, x, &weights.wk)?;
    let v = linear(tape, x, &weights.wv)?;
    let mut outputs = Vec::with_capacity(heads);
    let mut maps = Vec::with_capacity(heads);
    for head in 0..heads {
        let qi = tape.slice_cols(q, head * dh, dh)?;
        let ki = tape.slice_cols(k, head * dh, dh)?;
        let vi = tape.slice_cols(v, head * dh, dh)?;
        let kt = tape.transpose(ki)?;
        let scores = tape.matmul(qi, kt)?;
        let scaled = tape.scale(scores, 1.0 / (dh as f64).sqrt());
        let attn = tape.softmax_rows(scaled)?;
        maps.push(attn);
        outputs.push(tape.matmul(attn, vi)?);
    }
    let concat = tape.concat_cols(&outputs)?;
    let out = linear(tape, concat, &weights.wo)?;
    Ok((out, maps))
}

/// Pre-norm transformer block:
/// `x + MHA(LN(x))` then `x + MLP(LN(x))` with GELU inside the MLP.
pub fn encoder_layer(
    tape: &mut Tape,
    x: Var,
    layer: &super::params::EncoderLayerVars,
    heads: usize,
) -> Result<(Var, Vec<Var>)> {
    let normed = tape.layer_norm(x, layer.norm1.gain, layer.norm1.bias, LN_EPS)?;
    let (attn_out, maps) = multi_head_attention(tape, normed, &layer.attn, heads)?;
    let x = tape.add(x, attn_out)?;
    let normed = tape.layer_norm(x, layer.norm2.gain, layer.norm2.bias, LN_EPS)?;
    let hidden = linear(tape, normed, &layer.mlp_fc1)?;
    let hidden = tape.gelu(hidden);
    let mlp_out = linear(tape, hidden, &layer.mlp_fc2)?;
    let x = tape.add(x, mlp_out)?;
    Ok((x, maps))
}

/// Project encoded metadata slots `[M x w]` into the latent width and
/// layer-normalize each slot.
pub fn embed_metadata(
    tape: &mut Tape,
    encoded: Var,
    embed: &LinearVars,
    norm: &super::params::LayerNormVars,
) -> Result<Var> {
    let projected = linear(tape, encoded, embed)?;
    tape.layer_norm(projected, norm.gain, norm.bias, LN_EPS)
}

/// Concatenate image tokens (class token included) with metadata tokens
/// along the token axis and apply one residual self-attention step.
pub fn fuse(
    tape: &mut Tape,
    image_tokens: Var,
    metadata_tokens: Var,
    weights: &AttentionVars,
    heads: usize,
) -> Result<(Var, Vec<Var>)> {
    let z = tape.concat_rows(&[image_tokens, metadata_tokens])?;
    let (attn_out, maps) = multi_head_attention(tape, z, weights, heads)?;
    let out = tape.add(z, attn_out)?;
    Ok((out, maps))
}

fn classification_head(
    tape: &mut Tape,
    embeddings: Var,
    vars: &ParamVars,
    running_mean: &[f64],
    running_var: &[f64],
    mode: Mode,
) -> Result<(Var, Option<BatchStats>)> {
    let hidden = linear(tape, embeddings, &vars.head_fc1)?;
    let (normed, stats) = match mode {
        Mode::Train => {
            let (v, s) =
                tape.batch_norm_train(hidden, vars.head_bn.gain, vars.head_bn.bias, BN_EPS)?;
            (v, Some(s))
        }
        Mode::Eval => (
            tape.batch_norm_eval(
                hidden,
                vars.head_bn.gain,
                vars.head_bn.bias,
                running_mean,
                running_var,
                BN_EPS,
            )?,
            None,
        ),
    };
    let activated = tape.swish(normed);
    let logits = linear(tape, activated, &vars.head_fc2)?;
    Ok((logits, stats))
}

/// Output of a batched forward pass.
pub struct ForwardOutput {
    /// `[B x C]` logits.
    pub logits: Var,
    /// One trace per sample, batch order.
    pub traces: Vec<ForwardTrace>,
    /// Head batch-norm statistics when run in training mode.
    pub bn_stats: Option<BatchStats>,
}

/// Run the full pipeline for a batch: patch projection, class token,
/// positional embeddings, encoder stack, metadata embedding, fusion, head.
///
/// `record` keeps attention maps in the traces for relevancy propagation;
/// class-token embeddings are captured either way.
pub fn forward_batch(
    tape: &mut Tape,
    vars: &ParamVars,
    config: &ModelConfig,
    running_mean: &[f64],
    running_var: &[f64],
    batch: &[&EncodedSample],
    mode: Mode,
    record: bool,
) -> Result<ForwardOutput> {
    let d = config.embed_dim;
    let p = config.num_patches();
    let mut class_rows = Vec::with_capacity(batch.len());
    let mut traces = Vec::with_capacity(batch.len());
    for sample in batch {
        let patches = tape.constant(
            sample.patches.shape().to_vec(),
            sample.patches.data().to_vec(),
        );
        let projected = linear(tape, patches, &vars.patch_proj)?;
        let mut x = tape.concat_rows(&[vars.class_token, projected])?;
        x = tape.add(x, vars.pos_embed)?;

        let mut layer_maps: Vec<(usize, Vec<Var>)> = Vec::new();
        for layer in &vars.encoder {
            let (next, maps) = encoder_layer(tape, x, layer, config.num_heads)?;
            x = next;
            if record {
                layer_maps.push((p + 1, maps));
            }
        }
        let pre_fusion_class = tape.value(x)[0..d].to_vec();

        let (fused, post_fusion_class) = if config.image_only {
            (x, pre_fusion_class.clone())
        } else {
            let meta = tape.constant(
                sample.metadata.shape().to_vec(),
                sample.metadata.data().to_vec(),
            );
            let meta_tokens = embed_metadata(tape, meta, &vars.meta_embed, &vars.meta_norm)?;
            let (fused, maps) = fuse(tape, x, meta_tokens, &vars.fusion, config.num_heads)?;
            if record {
                layer_maps.push((config.fused_tokens(), maps));
            }
            let post = tape.value(fused)[0..d].to_vec();
            (fused, post)
        };
        class_rows.push(tape.slice_rows(fused, 0, 1)?);

        let attention = layer_maps
            .into_iter()
            .map(|(tokens, maps)| {
                let mut probs = Vec::with_capacity(maps.len() * tokens * tokens);
                for &m in &maps {
                    probs.extend_from_slice(tape.value(m));
                }
                AttentionRecord {
                    tokens,
                    heads: config.num_heads,
                    probs,
                    grads: None,
                    vars: maps,
                }
            })
            .collect();
        traces.push(ForwardTrace {
            attention,
            pre_fusion_class,
            post_fusion_class,
            logits: Vec::new(),
            num_patches: p,
            num_metadata: if config.image_only {
                0
            } else {
                config.num_metadata_slots
            },
        });
    }

    let embeddings = tape.concat_rows(&class_rows)?;
    let (logits, bn_stats) =
        classification_head(tape, embeddings, vars, running_mean, running_var, mode)?;
    let c = config.num_classes;
    let logit_data = tape.value(logits);
    for (i, trace) in traces.iter_mut().enumerate() {
        trace.logits = logit_data[i * c..(i + 1) * c].to_vec();
    }
    Ok(ForwardOutput {
        logits,
        traces,
        bn_stats,
    })
}

/// Patchify images and encode metadata for a whole dataset.
pub fn encode_samples(
    samples: &[Sample],
    schema: &MetadataSchema,
    config: &ModelConfig,
) -> Result<Vec<EncodedSample>> {
    samples
        .iter()
        .map(|s| {
            Ok(EncodedSample {
                id: s.id.clone(),
                label: s.label,
                patches: patchify(&s.image, config.patch_size)?,
                metadata: encode_metadata(&s.metadata, schema)?,
            })
        })
        .collect()
}
