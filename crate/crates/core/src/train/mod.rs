//! Training loop and evaluation protocol: weighted cross entropy over a
//! weighted with-replacement sampler, Adam with per-group learning rates,
//! best-validation checkpointing, and the five-metric report.

mod adam;
mod metrics;
mod sampler;

pub use adam::{Adam, AdamConfig};
pub use metrics::{auc_rank, metrics_from_scores, nan_mean, ClassMetrics, MetricsReport};
pub use sampler::{class_weights, WeightedSampler};

use crate::error::{Error, Result};
use crate::model::{bind, forward_batch, EncodedSample, Mode, ModelConfig, VitAttParams};
use crate::rng::seeded;
use crate::tensor::Tape;
use rand::Rng;
use serde::{Deserialize, Serialize};

const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder: f64,
    pub lr_other: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Stop once training-set accuracy reaches this value.
    #[serde(default)]
    pub early_stop_train_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            lr_encoder: 3e-5,
            lr_other: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            seed: 42,
            early_stop_train_acc: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(
                "batch size must be >= 2 for batch normalization".into(),
            ));
        }
        if self.lr_encoder < 0.0 || self.lr_other < 0.0 {
            return Err(Error::InvalidConfig("learning rates must be non-negative".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr_encoder: self.lr_encoder,
            lr_other: self.lr_other,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_macro_acc: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters at the best validation macro-accuracy epoch (earliest on
    /// ties), or the final ones when no validation set was given.
    pub best_params: VitAttParams,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub final_params: VitAttParams,
    pub history: Vec<EpochStats>,
}

/// Eval-mode logits for a set of samples.
pub fn predict_logits(
    config: &ModelConfig,
    params: &VitAttParams,
    set: &[EncodedSample],
) -> Result<Vec<Vec<f64>>> {
    let c = config.num_classes;
    let mut rows = Vec::with_capacity(set.len());
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
        let logits = tape.value(out.logits);
        for i in 0..chunk.len() {
            rows.push(logits[i * c..(i + 1) * c].to_vec());
        }
    }
    Ok(rows)
}

/// Softmax class probabilities for a set of samples, eval mode.
pub fn predict_probs(
    config: &ModelConfig,
    params: &VitAttParams,
    set: &[EncodedSample],
) -> Result<Vec<Vec<f64>>> {
    Ok(predict_logits(config, params, set)?
        .iter()
        .map(|row| softmax(row))
        .collect())
}

/// Training-mode loss over a whole sample set: one forward pass with batch
/// statistics from the set itself, so the value is a pure function of the
/// parameters. Running statistics are not touched.
fn train_mode_loss(
    config: &ModelConfig,
    params: &VitAttParams,
    set: &[EncodedSample],
    labels: &[usize],
    weights: &[f64],
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = bind(&mut tape, params);
    let refs: Vec<&EncodedSample> = set.iter().collect();
    let out = forward_batch(
        &mut tape,
        &bound.vars,
        config,
        &params.head.bn.running_mean,
        &params.head.bn.running_var,
        &refs,
        Mode::Train,
        false,
    )?;
    let loss = tape.cross_entropy_weighted(out.logits, labels, weights)?;
    Ok(tape.value(loss)[0])
}

/// Weight-normalized cross entropy from precomputed logits.
pub fn weighted_cross_entropy(
    logits: &[Vec<f64>],
    labels: &[usize],
    class_weights: &[f64],
) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (row, &y) in logits.iter().zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let w = class_weights[y];
        num -= w * (row[y] - max - lse);
        den += w;
    }
    num / den
}

pub(crate) fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Fraction of argmax predictions matching the labels.
pub fn plain_accuracy(labels: &[usize], probs: &[Vec<f64>]) -> f64 {
    let correct = labels
        .iter()
        .zip(probs)
        .filter(|(&y, row)| {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best == y
        })
        .count();
    correct as f64 / labels.len().max(1) as f64
}

/// Five-metric one-vs-rest report over a sample set.
pub fn evaluate(
    config: &ModelConfig,
    params: &VitAttParams,
    set: &[EncodedSample],
    class_names: &[String],
) -> Result<MetricsReport> {
    let probs = predict_probs(config, params, set)?;
    let labels: Vec<usize> = set.iter().map(|s| s.label).collect();
    metrics_from_scores(&labels, &probs, class_names)
}

/// Full training run. Deterministic for a fixed (config, data, seed) triple.
pub fn train(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    train_set: &[EncodedSample],
    val_set: &[EncodedSample],
) -> Result<TrainOutcome> {
    model_config.validate()?;
    train_config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    let labels: Vec<usize> = train_set.iter().map(|s| s.label).collect();
    let weights = class_weights(&labels, model_config.num_classes)?;
    let per_sample: Vec<f64> = labels.iter().map(|&l| weights[l]).collect();

    let mut run_rng = seeded(train_config.seed);
    let init_seed: u64 = run_rng.gen();
    let sampler_seed: u64 = run_rng.gen();
    let mut params = VitAttParams::init(model_config, init_seed);
    let mut sampler = WeightedSampler::new(&per_sample, sampler_seed)?;
    let mut optimizer = Adam::new(train_config.adam(), &params);

    let batches_per_epoch = train_set.len().div_ceil(train_config.batch_size);
    let mut history = Vec::with_capacity(train_config.epochs);
    let mut best: Option<(f64, usize, VitAttParams)> = None;

    for epoch in 0..train_config.epochs {
        for _ in 0..batches_per_epoch {
            let indices = sampler.draw(train_config.batch_size);
            let batch: Vec<&EncodedSample> = indices.iter().map(|&i| &train_set[i]).collect();
            let batch_labels: Vec<usize> = indices.iter().map(|&i| labels[i]).collect();

            let mut tape = Tape::new();
            let bound = bind(&mut tape, &params);
            // Parameters blowing up surface as non-finite values mid-forward;
            // report them as divergence with the epoch attached.
            let out = forward_batch(
                &mut tape,
                &bound.vars,
                model_config,
                &params.head.bn.running_mean,
                &params.head.bn.running_var,
                &batch,
                Mode::Train,
                false,
            )
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::Diverged { epoch },
                other => other,
            })?;
            let loss = tape.cross_entropy_weighted(out.logits, &batch_labels, &weights)?;
            if !tape.value(loss)[0].is_finite() {
                return Err(Error::Diverged { epoch });
            }
            tape.backward(loss)?;

            for (var, (_, _, tensor)) in bound.flat.iter().zip(params.visit_mut()) {
                tensor.grad = tape.grad(*var).map(|g| g.to_vec());
            }
            optimizer.step(&mut params);

            if let Some(stats) = out.bn_stats {
                let unbias = stats.batch as f64 / (stats.batch as f64 - 1.0);
                let bn = &mut params.head.bn;
                for j in 0..bn.running_mean.len() {
                    bn.running_mean[j] =
                        (1.0 - BN_MOMENTUM) * bn.running_mean[j] + BN_MOMENTUM * stats.mean[j];
                    bn.running_var[j] = (1.0 - BN_MOMENTUM) * bn.running_var[j]
                        + BN_MOMENTUM * stats.var[j] * unbias;
                }
            }
        }

        // Epoch loss over the full training set with the end-of-epoch
        // parameters, so the log is comparable across epochs.
        let train_loss = train_mode_loss(model_config, &params, train_set, &labels, &weights)?;
        if !train_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let val_macro_acc = if val_set.is_empty() {
            f64::NAN
        } else {
            evaluate(model_config, &params, val_set, &dummy_names(model_config.num_classes))?
                .macro_acc
        };
        history.push(EpochStats {
            epoch,
            train_loss,
            val_macro_acc,
        });
        if !val_macro_acc.is_nan() {
            let better = match &best {
                Some((acc, _, _)) => val_macro_acc > *acc,
                None => true,
            };
            if better {
                best = Some((val_macro_acc, epoch, params.clone()));
            }
        }

        if let Some(target) = train_config.early_stop_train_acc {
            let probs = predict_probs(model_config, &params, train_set)?;
            if plain_accuracy(&labels, &probs) >= target {
                break;
            }
        }
    }

    let (best_val_acc, best_epoch, best_params) = match best {
        Some((acc, epoch, p)) => (acc, epoch, p),
        None => (f64::NAN, history.len().saturating_sub(1), params.clone()),
    };
    Ok(TrainOutcome {
        best_params,
        best_epoch,
        best_val_acc,
        final_params: params,
        history,
    })
}

fn dummy_names(c: usize) -> Vec<String> {
    (0..c).map(|i| i.to_string()).collect()
}
