//! Deterministic per-class proportional splitting.

use super::Sample;
use crate::error::{Error, Result};
use crate::rng::{seeded, shuffle};

/// Split samples into per-ratio parts, class by class. Within each class the
/// order is shuffled by the seed, counts are allocated by largest remainder,
/// and when a class has at least as many samples as there are parts every
/// part receives at least one.
pub fn stratified_split(
    samples: &[Sample],
    ratios: &[f64],
    seed: u64,
) -> Result<Vec<Vec<Sample>>> {
    if ratios.is_empty() || ratios.iter().any(|&r| r < 0.0) {
        return Err(Error::InvalidConfig("ratios must be non-negative".into()));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split ratios sum to {total}, expected 1"
        )));
    }
    let num_classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(0);
    let mut rng = seeded(seed);
    let mut parts: Vec<Vec<Sample>> = vec![Vec::new(); ratios.len()];
    for class in 0..num_classes {
        let mut indices: Vec<usize> = samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            continue;
        }
        if indices.len() < ratios.len() {
            eprintln!(
                "warning: class {class} has {} samples for {} splits; allocating best-effort",
                indices.len(),
                ratios.len()
            );
        }
        shuffle(&mut indices, &mut rng);
        let counts = allocate(indices.len(), ratios);
        let mut cursor = 0;
        for (part, &count) in parts.iter_mut().zip(&counts) {
            for &idx in &indices[cursor..cursor + count] {
                part.push(samples[idx].clone());
            }
            cursor += count;
        }
    }
    Ok(parts)
}

/// Largest-remainder apportionment of `n` items over `ratios`, amended so no
/// part is empty while another has spares (when `n >= parts`).
fn allocate(n: usize, ratios: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = ratios.iter().map(|r| (r * n as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = ratios[a] * n as f64 - counts[a] as f64;
        let fb = ratios[b] * n as f64 - counts[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..n - assigned {
        counts[order[i % order.len()]] += 1;
    }
    if n >= ratios.len() {
        while counts.iter().any(|&c| c == 0) {
            let empty = counts.iter().position(|&c| c == 0).unwrap();
            let donor = counts
                .iter()
                .enumerate()
                .max_by_key(|(_, &c)| c)
                .map(|(i, _)| i)
                .unwrap();
            counts[donor] -= 1;
            counts[empty] += 1;
        }
    }
    counts
}
