//! Exact t-SNE to three dimensions.
//!
//! Symmetric affinities from perplexity-calibrated Gaussian kernels, a
//! Student-t low-dimensional kernel, and KL gradient descent with early
//! exaggeration and a momentum switch. O(N^2) per iteration, which is the
//! right trade at a few thousand points.

use crate::error::{Error, Result};
use crate::rng::{normal, seeded};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iters: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub momentum_start: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iters: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            momentum_start: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TsneResult {
    pub coords: Vec<[f64; 3]>,
    /// KL divergence of the un-exaggerated affinities after each iteration.
    pub kl_history: Vec<f64>,
}

const P_FLOOR: f64 = 1e-12;
const ENTROPY_TOL: f64 = 1e-4;

fn pairwise_sq(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len();
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for (a, b) in vectors[i].iter().zip(&vectors[j]) {
                s += (a - b) * (a - b);
            }
            d2[i * n + j] = s;
            d2[j * n + i] = s;
        }
    }
    d2
}

/// Row of conditional probabilities for point `i`, with the bandwidth found
/// by binary search so the distribution's Shannon entropy matches
/// ln(perplexity) within [`ENTROPY_TOL`] (when attainable).
fn calibrate_row(d2: &[f64], n: usize, i: usize, target_entropy: f64, row: &mut [f64]) {
    let mut beta = 1.0;
    let mut beta_min = f64::NEG_INFINITY;
    let mut beta_max = f64::INFINITY;
    for _ in 0..200 {
        let mut sum = 0.0;
        for j in 0..n {
            row[j] = if j == i {
                0.0
            } else {
                (-beta * d2[i * n + j]).exp()
            };
            sum += row[j];
        }
        let mut entropy = 0.0;
        if sum > 0.0 {
            for v in row.iter_mut() {
                *v /= sum;
                if *v > P_FLOOR {
                    entropy -= *v * v.ln();
                }
            }
        }
        let diff = entropy - target_entropy;
        if diff.abs() < ENTROPY_TOL {
            break;
        }
        if diff > 0.0 {
            beta_min = beta;
            beta = if beta_max.is_infinite() {
                beta * 2.0
            } else {
                (beta + beta_max) / 2.0
            };
        } else {
            beta_max = beta;
            beta = if beta_min.is_infinite() {
                beta / 2.0
            } else {
                (beta + beta_min) / 2.0
            };
        }
    }
}

/// Symmetric joint affinities, floored and normalized to sum 1.
fn joint_affinities(vectors: &[Vec<f64>], perplexity: f64) -> Vec<f64> {
    let n = vectors.len();
    let d2 = pairwise_sq(vectors);
    let target = perplexity.ln();
    let mut conditional = vec![0.0; n * n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        calibrate_row(&d2, n, i, target, &mut row);
        conditional[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] =
                ((conditional[i * n + j] + conditional[j * n + i]) / (2.0 * n as f64)).max(
                    if i == j { 0.0 } else { P_FLOOR },
                );
        }
    }
    p
}

/// Project `vectors` (N x d, N >= 4) to 3-D. Deterministic per seed;
/// exact-duplicate inputs are separated by a seeded 1e-10 jitter.
pub fn tsne_3d(vectors: &[Vec<f64>], config: &TsneConfig) -> Result<TsneResult> {
    let n = vectors.len();
    if n < 4 {
        return Err(Error::InvalidConfig(format!(
            "t-SNE needs at least 4 points, got {n}"
        )));
    }
    if config.perplexity <= 0.0 || config.perplexity >= n as f64 / 3.0 {
        return Err(Error::InvalidConfig(format!(
            "perplexity {} must be in (0, N/3) for N = {n}",
            config.perplexity
        )));
    }
    if vectors.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite { op: "tsne_3d" });
    }
    let mut rng = seeded(config.seed);
    let mut vectors = vectors.to_vec();
    let d2 = pairwise_sq(&vectors);
    let has_duplicates =
        (0..n).any(|i| (0..n).any(|j| j != i && d2[i * n + j] == 0.0));
    if has_duplicates {
        for v in vectors.iter_mut() {
            for x in v.iter_mut() {
                *x += 1e-10 * normal(&mut rng);
            }
        }
    }
    let p = joint_affinities(&vectors, config.perplexity);

    let mut y = vec![[0.0f64; 3]; n];
    for point in y.iter_mut() {
        for c in point.iter_mut() {
            *c = 1e-4 * normal(&mut rng);
        }
    }
    let mut velocity = vec![[0.0f64; 3]; n];
    let mut kl_history = Vec::with_capacity(config.iters);
    let mut qnum = vec![0.0; n * n];

    for iter in 0..config.iters {
        // Student-t numerators and their total.
        let mut qsum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut d = 0.0;
                for c in 0..3 {
                    let diff = y[i][c] - y[j][c];
                    d += diff * diff;
                }
                let q = 1.0 / (1.0 + d);
                qnum[i * n + j] = q;
                qnum[j * n + i] = q;
                qsum += 2.0 * q;
            }
        }
        let exaggeration = if iter < config.exaggeration_iters {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < config.momentum_switch_iter {
            config.momentum_start
        } else {
            config.momentum_final
        };
        for i in 0..n {
            let mut grad = [0.0f64; 3];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = (qnum[i * n + j] / qsum).max(P_FLOOR);
                let factor = 4.0 * (exaggeration * p[i * n + j] - q) * qnum[i * n + j];
                for c in 0..3 {
                    grad[c] += factor * (y[i][c] - y[j][c]);
                }
            }
            for c in 0..3 {
                velocity[i][c] = momentum * velocity[i][c] - config.learning_rate * grad[c];
            }
        }
        let mut mean = [0.0f64; 3];
        for (point, vel) in y.iter_mut().zip(&velocity) {
            for c in 0..3 {
                point[c] += vel[c];
                mean[c] += point[c];
            }
        }
        for c in 0..3 {
            mean[c] /= n as f64;
        }
        for point in y.iter_mut() {
            for c in 0..3 {
                point[c] -= mean[c];
            }
        }

        // KL of the true affinities against the current embedding.
        let mut qsum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut d = 0.0;
                for c in 0..3 {
                    let diff = y[i][c] - y[j][c];
                    d += diff * diff;
                }
                let q = 1.0 / (1.0 + d);
                qnum[i * n + j] = q;
                qnum[j * n + i] = q;
                qsum += 2.0 * q;
            }
        }
        let mut kl = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let pij = p[i * n + j];
                let qij = (qnum[i * n + j] / qsum).max(P_FLOOR);
                kl += pij * (pij / qij).ln();
            }
        }
        kl_history.push(kl);
    }
    Ok(TsneResult {
        coords: y,
        kl_history,
    })
}

/// Expose the affinity construction for invariant tests.
pub fn affinity_matrix(vectors: &[Vec<f64>], perplexity: f64) -> Vec<f64> {
    joint_affinities(vectors, perplexity)
}
