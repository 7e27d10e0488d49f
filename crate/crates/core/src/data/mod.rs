//! Dataset handling: schema-typed metadata, CSV + image-folder ingestion,
//! encoding into fixed-width slot tensors, stratified splits, correlation
//! ranking, and a synthetic-dataset generator for end-to-end verification.

mod correlation;
mod image;
mod load;
pub mod ppm;
mod split;
mod synth;

pub use correlation::{
    correlation_ranking, select_metadata, CorrelationReport, SubsetMode,
};
pub use image::RgbImage;
pub use load::{load_dataset, LoadReport, LoadedDataset};
pub use split::stratified_split;
pub use synth::{generate_synthetic, write_dataset, SynthManifest, SynthSpec, SyntheticDataset, VisualRule};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Kind of one metadata field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Binary,
    Categorical { levels: Vec<String> },
    Continuous { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FieldKind,
}

impl FieldSpec {
    /// Encoded width of this field before padding: binary takes two slots,
    /// a categorical one per level, a continuous one.
    pub fn encoded_width(&self) -> usize {
        match &self.kind {
            FieldKind::Binary => 2,
            FieldKind::Categorical { levels } => levels.len(),
            FieldKind::Continuous { .. } => 1,
        }
    }
}

/// Ordered description of the metadata fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataSchema {
    pub fields: Vec<FieldSpec>,
}

impl MetadataSchema {
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for f in &fields {
            if !seen.insert(f.name.clone()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate metadata field name {:?}",
                    f.name
                )));
            }
            match &f.kind {
                FieldKind::Categorical { levels } if levels.is_empty() => {
                    return Err(Error::InvalidConfig(format!(
                        "field {:?} has no levels",
                        f.name
                    )));
                }
                FieldKind::Continuous { min, max } if min >= max => {
                    return Err(Error::InvalidConfig(format!(
                        "field {:?} has empty range [{min}, {max}]",
                        f.name
                    )));
                }
                _ => {}
            }
        }
        Ok(Self { fields })
    }

    /// Number of slots M.
    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    /// Common per-slot width w: the widest field, others zero-padded.
    pub fn slot_width(&self) -> usize {
        self.fields
            .iter()
            .map(FieldSpec::encoded_width)
            .max()
            .unwrap_or(0)
    }

    pub fn field_names(&self) -> Vec<String> {
        self.fields.iter().map(|f| f.name.clone()).collect()
    }

    /// Schema restricted to the given field indices, kept in schema order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let fields = sorted
            .iter()
            .map(|&i| {
                self.fields
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidConfig(format!("field index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(fields)
    }
}

/// One raw metadata value, parsed against its field spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetaValue {
    Bool(bool),
    Level(usize),
    Number(f64),
}

/// One image + metadata + label record.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    /// `[ch, H, W]` pixels in [0, 1].
    pub image: Tensor,
    /// One value per schema field, schema order.
    pub metadata: Vec<MetaValue>,
    pub label: usize,
}

/// Soft one-hot encoding of a sample's metadata into an `M x w` tensor:
/// binary fields to `[1,0]`/`[0,1]`, categorical to a one-hot over levels,
/// continuous to one `(v-min)/(max-min)` slot; every row zero-padded to the
/// common width. Out-of-range continuous values clamp with a warning on
/// stderr.
pub fn encode_metadata(values: &[MetaValue], schema: &MetadataSchema) -> Result<Tensor> {
    if values.len() != schema.num_fields() {
        return Err(Error::ShapeMismatch {
            op: "encode_metadata",
            lhs: vec![values.len()],
            rhs: vec![schema.num_fields()],
        });
    }
    let w = schema.slot_width();
    let mut out = vec![0.0; schema.num_fields() * w];
    for (i, (value, field)) in values.iter().zip(&schema.fields).enumerate() {
        let row = &mut out[i * w..(i + 1) * w];
        match (&field.kind, value) {
            (FieldKind::Binary, MetaValue::Bool(b)) => {
                if *b {
                    row[0] = 1.0;
                } else {
                    row[1] = 1.0;
                }
            }
            (FieldKind::Categorical { levels }, MetaValue::Level(l)) => {
                if *l >= levels.len() {
                    return Err(Error::InvalidConfig(format!(
                        "level {l} out of range for field {:?}",
                        field.name
                    )));
                }
                row[*l] = 1.0;
            }
            (FieldKind::Continuous { min, max }, MetaValue::Number(v)) => {
                let mut v = *v;
                if v < *min || v > *max {
                    eprintln!(
                        "warning: field {:?} value {v} outside [{min}, {max}], clamping",
                        field.name
                    );
                    v = v.clamp(*min, *max);
                }
                row[0] = (v - min) / (max - min);
            }
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "value {value:?} does not match kind of field {:?}",
                    field.name
                )));
            }
        }
    }
    Tensor::new(vec![schema.num_fields(), w], out)
}

/// Keep only the given fields (schema order) in every sample.
pub fn apply_subset(samples: &[Sample], indices: &[usize]) -> Vec<Sample> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    samples
        .iter()
        .map(|s| Sample {
            id: s.id.clone(),
            image: s.image.clone(),
            metadata: sorted.iter().map(|&i| s.metadata[i].clone()).collect(),
            label: s.label,
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn demo_schema() -> MetadataSchema {
    MetadataSchema::new(vec![
        FieldSpec {
            name: "smoke".into(),
            kind: FieldKind::Binary,
        },
        FieldSpec {
            name: "region".into(),
            kind: FieldKind::Categorical {
                levels: vec!["arm".into(), "face".into(), "back".into()],
            },
        },
        FieldSpec {
            name: "age".into(),
            kind: FieldKind::Continuous {
                min: 0.0,
                max: 100.0,
            },
        },
    ])
    .unwrap()
}
