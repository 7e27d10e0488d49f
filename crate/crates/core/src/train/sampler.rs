//! With-replacement weighted index sampling.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Draws dataset indices with probability proportional to each sample's
/// weight, deterministically for a given seed.
#[derive(Debug)]
pub struct WeightedSampler {
    cumulative: Vec<f64>,
    total: f64,
    rng: ChaCha8Rng,
}

impl WeightedSampler {
    /// `weights[i]` is the draw weight of sample `i` (for class balancing,
    /// the weight of its class).
    pub fn new(weights: &[f64], seed: u64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig("sampler needs at least one weight".into()));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidConfig("sampler weights must be finite and non-negative".into()));
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut total = 0.0;
        for &w in weights {
            total += w;
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Err(Error::InvalidConfig("sampler weights sum to zero".into()));
        }
        Ok(Self {
            cumulative,
            total,
            rng: crate::rng::seeded(seed),
        })
    }

    pub fn next_index(&mut self) -> usize {
        let u = self.rng.gen::<f64>() * self.total;
        // First index whose cumulative weight exceeds u.
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&u).unwrap())
        {
            Ok(i) => (i + 1).min(self.cumulative.len() - 1),
            Err(i) => i.min(self.cumulative.len() - 1),
        }
    }

    pub fn draw(&mut self, n: usize) -> Vec<usize> {
        (0..n).map(|_| self.next_index()).collect()
    }
}

/// Per-class inverse-frequency weights `N / (C * n_c)`; their sample-weighted
/// mean is 1 by construction.
pub fn class_weights(labels: &[usize], num_classes: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; num_classes];
    for &l in labels {
        if l >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: l,
                classes: num_classes,
            });
        }
        counts[l] += 1;
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass { class });
    }
    let n = labels.len() as f64;
    Ok(counts
        .iter()
        .map(|&c| n / (num_classes as f64 * c as f64))
        .collect())
}
