//! Gradient-weighted attention relevancy propagation.
//!
//! A recorded forward pass keeps every attention map; backward from one
//! logit fills their gradients. Relevancy starts as the identity over the
//! fused token set and each attention layer adds its positively-clamped,
//! head-averaged gradient-weighted map: `R <- R + mean_h[(dA * A)+] . R`.
//! Encoder layers touch only the image-token block, the fusion layer the
//! full matrix. The class-token row of the result, split into the patch
//! grid and the metadata slots and min-max normalized, is the relevancy map.

use crate::data::{FieldKind, MetaValue, MetadataSchema, RgbImage, Sample};
use crate::error::{Error, Result};
use crate::model::{
    bind, encode_samples, forward_batch, EncodedSample, ForwardTrace, Mode, ModelConfig,
    VitAttParams,
};
use crate::tensor::{Tape, Tensor};

/// Per-token relevancy scores for one sample and one target class.
#[derive(Debug, Clone)]
pub struct RelevancyMap {
    pub target_class: usize,
    /// Patch scores in row-major patch order, min-max normalized to [0, 1]
    /// jointly with `metadata_scores`.
    pub image_grid: Vec<f64>,
    /// Side length of the square patch grid.
    pub grid_side: usize,
    /// One normalized score per metadata slot.
    pub metadata_scores: Vec<f64>,
    /// Class-token row of the propagated matrix before normalization,
    /// self-entry included.
    pub raw_token_scores: Vec<f64>,
}

/// Propagate a recorded trace into a relevancy map for `target_class`.
pub fn relevancy_propagate(trace: &ForwardTrace, target_class: usize) -> Result<RelevancyMap> {
    if trace.attention.is_empty() {
        return Err(Error::MissingTraceGradients);
    }
    let t = trace.num_patches + 1 + trace.num_metadata;
    let mut relevancy = identity(t);
    for rec in &trace.attention {
        let grads = rec.grads.as_ref().ok_or(Error::MissingTraceGradients)?;
        let lt = rec.tokens;
        let lt2 = lt * lt;
        // Head-mean of the positive part of gradient-times-attention.
        let mut abar = vec![0.0; lt2];
        for h in 0..rec.heads {
            let probs = &rec.probs[h * lt2..(h + 1) * lt2];
            let grad = &grads[h * lt2..(h + 1) * lt2];
            for k in 0..lt2 {
                let weighted = grad[k] * probs[k];
                if weighted > 0.0 {
                    abar[k] += weighted;
                }
            }
        }
        for v in &mut abar {
            *v /= rec.heads as f64;
        }
        // Zero-padded to the fused token count; encoder layers only reach
        // the leading image-token block.
        let mut padded = vec![0.0; t * t];
        for i in 0..lt {
            for j in 0..lt {
                padded[i * t + j] = abar[i * lt + j];
            }
        }
        let mut update = vec![0.0; t * t];
        for i in 0..t {
            for j in 0..t {
                let mut s = 0.0;
                for k in 0..t {
                    s += padded[i * t + k] * relevancy[k * t + j];
                }
                update[i * t + j] = s;
            }
        }
        for (r, u) in relevancy.iter_mut().zip(&update) {
            *r += u;
        }
    }
    let raw: Vec<f64> = relevancy[0..t].to_vec();
    let p = trace.num_patches;
    let mut combined: Vec<f64> = raw[1..].to_vec();
    normalize(&mut combined);
    let image_grid = combined[..p].to_vec();
    let metadata_scores = combined[p..].to_vec();
    Ok(RelevancyMap {
        target_class,
        grid_side: (p as f64).sqrt().round() as usize,
        image_grid,
        metadata_scores,
        raw_token_scores: raw,
    })
}

fn identity(t: usize) -> Vec<f64> {
    let mut m = vec![0.0; t * t];
    for i in 0..t {
        m[i * t + i] = 1.0;
    }
    m
}

/// Joint min-max normalization to [0, 1]; a flat vector maps to zeros.
fn normalize(values: &mut [f64]) {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        for v in values.iter_mut() {
            *v = (*v - min) / (max - min);
        }
    } else {
        for v in values.iter_mut() {
            *v = 0.0;
        }
    }
}

/// Record a forward pass for one sample, backpropagate from the target
/// logit, and propagate relevancy.
pub fn explain_sample(
    config: &ModelConfig,
    params: &VitAttParams,
    sample: &EncodedSample,
    target_class: usize,
) -> Result<(RelevancyMap, ForwardTrace)> {
    if target_class >= config.num_classes {
        return Err(Error::LabelOutOfRange {
            label: target_class,
            classes: config.num_classes,
        });
    }
    let mut tape = Tape::new();
    let bound = bind(&mut tape, params);
    let out = forward_batch(
        &mut tape,
        &bound.vars,
        config,
        &params.head.bn.running_mean,
        &params.head.bn.running_var,
        &[sample],
        Mode::Eval,
        true,
    )?;
    let target = tape.pick(out.logits, target_class)?;
    tape.backward(target)?;
    let mut trace = out.traces.into_iter().next().expect("one trace per sample");
    trace.capture_attention_gradients(&tape)?;
    let map = relevancy_propagate(&trace, target_class)?;
    Ok((map, trace))
}

/// Per-class mean metadata relevancy with per-cell value summaries.
#[derive(Debug, Clone)]
pub struct ClassRelevancy {
    pub class_names: Vec<String>,
    pub field_names: Vec<String>,
    /// One row per class; NaN row for classes without samples.
    pub scores: Vec<Vec<f64>>,
    /// Value distribution summary per (class, field) cell.
    pub summaries: Vec<Vec<String>>,
    pub warnings: Vec<String>,
}

/// Average each sample's relevancy map for its true class over every class.
pub fn class_average_metadata_relevancy(
    config: &ModelConfig,
    params: &VitAttParams,
    samples: &[Sample],
    schema: &MetadataSchema,
    class_names: &[String],
) -> Result<ClassRelevancy> {
    let c = class_names.len();
    let m = schema.num_fields();
    let encoded = encode_samples(samples, schema, config)?;
    let mut sums = vec![vec![0.0; m]; c];
    let mut counts = vec![0usize; c];
    for (sample, enc) in samples.iter().zip(&encoded) {
        let (map, _) = explain_sample(config, params, enc, sample.label)?;
        for (j, v) in map.metadata_scores.iter().enumerate() {
            sums[sample.label][j] += v;
        }
        counts[sample.label] += 1;
    }
    let mut warnings = Vec::new();
    let scores: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(class, (row, &count))| {
            if count == 0 {
                warnings.push(format!(
                    "class {:?} has no samples; relevancy row is undefined",
                    class_names[class]
                ));
                vec![f64::NAN; m]
            } else {
                row.iter().map(|s| s / count as f64).collect()
            }
        })
        .collect();
    let summaries = value_summaries(samples, schema, c);
    Ok(ClassRelevancy {
        class_names: class_names.to_vec(),
        field_names: schema.field_names(),
        scores,
        summaries,
        warnings,
    })
}

/// Binary fields summarize as true/false counts, continuous as the mean,
/// categorical as the most frequent level with its count.
fn value_summaries(samples: &[Sample], schema: &MetadataSchema, c: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::with_capacity(schema.num_fields()); c];
    for class in 0..c {
        let members: Vec<&Sample> = samples.iter().filter(|s| s.label == class).collect();
        for (j, field) in schema.fields.iter().enumerate() {
            let summary = if members.is_empty() {
                "-".to_string()
            } else {
                match &field.kind {
                    FieldKind::Binary => {
                        let t = members
                            .iter()
                            .filter(|s| matches!(s.metadata[j], MetaValue::Bool(true)))
                            .count();
                        format!("T:{} F:{}", t, members.len() - t)
                    }
                    FieldKind::Continuous { .. } => {
                        let mean: f64 = members
                            .iter()
                            .map(|s| match s.metadata[j] {
                                MetaValue::Number(v) => v,
                                _ => 0.0,
                            })
                            .sum::<f64>()
                            / members.len() as f64;
                        format!("mean {mean:.3}")
                    }
                    FieldKind::Categorical { levels } => {
                        let mut counts = vec![0usize; levels.len()];
                        for s in &members {
                            if let MetaValue::Level(l) = s.metadata[j] {
                                counts[l] += 1;
                            }
                        }
                        let (best, count) = counts
                            .iter()
                            .enumerate()
                            .max_by_key(|(_, &n)| n)
                            .map(|(i, &n)| (i, n))
                            .unwrap();
                        format!("{}:{}", levels[best], count)
                    }
                }
            };
            out[class].push(summary);
        }
    }
    out
}

/// Upscale the patch grid (nearest neighbor) and alpha-blend a cold-to-hot
/// overlay onto the base image. `v = 0` renders blue, `v = 1` red.
pub fn render_saliency(map: &RelevancyMap, base: &Tensor) -> Result<RgbImage> {
    let (h, w) = match base.shape()[..] {
        [3, h, w] => (h, w),
        _ => {
            return Err(Error::ShapeMismatch {
                op: "render_saliency",
                lhs: base.shape().to_vec(),
                rhs: vec![3, 0, 0],
            })
        }
    };
    if map.grid_side == 0 || h % map.grid_side != 0 || h != w {
        return Err(Error::InvalidConfig(format!(
            "saliency grid {} does not tile a {h}x{w} image",
            map.grid_side
        )));
    }
    let patch = h / map.grid_side;
    let data = base.data();
    let mut out = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let p = (y / patch) * map.grid_side + x / patch;
            let v = map.image_grid[p];
            let heat = [v, 0.0, 1.0 - v];
            let mut rgb = [0u8; 3];
            for ch in 0..3 {
                let blended = 0.5 * data[ch * h * w + y * w + x] + 0.5 * heat[ch];
                rgb[ch] = (blended * 255.0).round().clamp(0.0, 255.0) as u8;
            }
            out.set(x, y, rgb);
        }
    }
    Ok(out)
}
