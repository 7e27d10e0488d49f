//! Mean silhouette with Euclidean distance.

use crate::error::{Error, Result};

/// Mean over points of `(b - a) / max(a, b)`, where `a` is the mean
/// intra-cluster distance and `b` the mean distance to the nearest other
/// cluster. Points in singleton clusters score 0; so do coincident points
/// with `a = b = 0`.
pub fn separation_score(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() || points.is_empty() {
        return Err(Error::InvalidConfig(
            "silhouette needs aligned, non-empty points and labels".into(),
        ));
    }
    let clusters: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    if clusters.len() < 2 {
        return Err(Error::InvalidConfig(
            "silhouette needs at least two clusters".into(),
        ));
    }
    let n = points.len();
    let dist = |i: usize, j: usize| -> f64 {
        points[i]
            .iter()
            .zip(&points[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        let own_count = labels.iter().filter(|&&l| l == own).count();
        if own_count == 1 {
            continue; // contributes 0
        }
        let mut intra = 0.0;
        let mut nearest_other = f64::INFINITY;
        for &cluster in &clusters {
            if cluster == own {
                for j in 0..n {
                    if j != i && labels[j] == own {
                        intra += dist(i, j);
                    }
                }
                intra /= (own_count - 1) as f64;
            } else {
                let mut sum = 0.0;
                let mut count = 0usize;
                for j in 0..n {
                    if labels[j] == cluster {
                        sum += dist(i, j);
                        count += 1;
                    }
                }
                if count > 0 {
                    nearest_other = nearest_other.min(sum / count as f64);
                }
            }
        }
        let denom = intra.max(nearest_other);
        if denom > 0.0 {
            total += (nearest_other - intra) / denom;
        }
    }
    Ok(total / n as f64)
}
