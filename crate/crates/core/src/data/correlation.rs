//! Correlation of metadata fields against the diagnostic label, and the
//! high/low-correlation subset selection built on it.

use super::{FieldKind, MetaValue, MetadataSchema, Sample};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Per-field correlation against the label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub field_names: Vec<String>,
    /// One coefficient per field, schema order, in [-1, 1] (by convention 0
    /// for zero-variance columns).
    pub coefficients: Vec<f64>,
    /// Field indices sorted by descending coefficient, ties by schema order.
    pub ranking: Vec<usize>,
}

/// Which metadata fields to train with. Serializes as `"all"`, `"HC-k"`, or
/// `"LC-k"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubsetMode {
    #[default]
    All,
    /// k highest-correlation fields.
    Hc(usize),
    /// k lowest-correlation fields.
    Lc(usize),
}

impl Serialize for SubsetMode {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SubsetMode {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl std::fmt::Display for SubsetMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubsetMode::All => write!(f, "all"),
            SubsetMode::Hc(k) => write!(f, "HC-{k}"),
            SubsetMode::Lc(k) => write!(f, "LC-{k}"),
        }
    }
}

impl std::str::FromStr for SubsetMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let lower = s.to_ascii_lowercase();
        if lower == "all" {
            return Ok(SubsetMode::All);
        }
        let (mode, k) = lower
            .split_once('-')
            .ok_or_else(|| format!("expected all, HC-k, or LC-k, got {s:?}"))?;
        let k: usize = k.parse().map_err(|_| format!("bad subset size in {s:?}"))?;
        match mode {
            "hc" => Ok(SubsetMode::Hc(k)),
            "lc" => Ok(SubsetMode::Lc(k)),
            _ => Err(format!("expected all, HC-k, or LC-k, got {s:?}")),
        }
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    // Zero-variance columns correlate with nothing, by convention.
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Numeric columns representing one field: binary and continuous reduce to a
/// single column, categorical to one column per level.
fn field_columns(samples: &[Sample], field_index: usize, kind: &FieldKind) -> Vec<Vec<f64>> {
    match kind {
        FieldKind::Binary => vec![samples
            .iter()
            .map(|s| match &s.metadata[field_index] {
                MetaValue::Bool(true) => 1.0,
                _ => 0.0,
            })
            .collect()],
        FieldKind::Categorical { levels } => (0..levels.len())
            .map(|level| {
                samples
                    .iter()
                    .map(|s| match &s.metadata[field_index] {
                        MetaValue::Level(l) if *l == level => 1.0,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect(),
        FieldKind::Continuous { .. } => vec![samples
            .iter()
            .map(|s| match &s.metadata[field_index] {
                MetaValue::Number(v) => *v,
                _ => 0.0,
            })
            .collect()],
    }
}

/// Correlate every metadata field with the diagnostic label.
///
/// The label is expanded to a one-hot column per class and each field to its
/// numeric columns; a field's coefficient is the largest absolute Pearson
/// correlation over all (field column, class column) pairs. Fields are
/// ranked descending, ties broken by schema order.
pub fn correlation_ranking(
    samples: &[Sample],
    schema: &MetadataSchema,
) -> Result<CorrelationReport> {
    let num_classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(0);
    if num_classes < 2 {
        return Err(Error::InvalidConfig(
            "correlation ranking needs at least two classes".into(),
        ));
    }
    let class_columns: Vec<Vec<f64>> = (0..num_classes)
        .map(|c| {
            samples
                .iter()
                .map(|s| if s.label == c { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut coefficients = Vec::with_capacity(schema.num_fields());
    for (i, field) in schema.fields.iter().enumerate() {
        let columns = field_columns(samples, i, &field.kind);
        let mut best: f64 = 0.0;
        for col in &columns {
            for class_col in &class_columns {
                best = best.max(pearson(col, class_col).abs());
            }
        }
        coefficients.push(best);
    }
    let mut ranking: Vec<usize> = (0..coefficients.len()).collect();
    ranking.sort_by(|&a, &b| {
        coefficients[b]
            .partial_cmp(&coefficients[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    Ok(CorrelationReport {
        field_names: schema.field_names(),
        coefficients,
        ranking,
    })
}

/// Field indices (schema order) for the requested subset.
pub fn select_metadata(report: &CorrelationReport, mode: SubsetMode) -> Result<Vec<usize>> {
    let m = report.coefficients.len();
    let k = match mode {
        SubsetMode::All => return Ok((0..m).collect()),
        SubsetMode::Hc(k) | SubsetMode::Lc(k) => k,
    };
    if k > m {
        return Err(Error::InvalidConfig(format!(
            "subset size {k} exceeds {m} fields"
        )));
    }
    let mut chosen: Vec<usize> = match mode {
        SubsetMode::Hc(_) => report.ranking[..k].to_vec(),
        SubsetMode::Lc(_) => report.ranking[m - k..].to_vec(),
        SubsetMode::All => unreachable!(),
    };
    chosen.sort_unstable();
    Ok(chosen)
}
