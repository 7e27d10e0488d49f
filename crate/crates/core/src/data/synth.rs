//! Synthetic dataset generator with a ground-truth manifest.
//!
//! Each class paints a colored disk at a class-determined position over a
//! noisy background, and planted metadata fields carry a label-derived
//! signal next to pure-noise fields. With `fusion_necessity` on, classes are
//! grouped into visual pairs: the image reveals only the pair, the planted
//! metadata only the parity within the pair, so the label is decidable only
//! from both together.

use super::image::RgbImage;
use super::ppm::write_ppm;
use super::{FieldKind, FieldSpec, MetaValue, MetadataSchema, Sample};
use crate::error::{Error, Result};
use crate::rng::{normal, seeded};
use crate::tensor::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub image_size: usize,
    /// Planted metadata fields carrying label signal.
    pub informative_fields: usize,
    /// Metadata fields independent of the label.
    pub noise_fields: usize,
    /// Pair classes visually so neither modality suffices alone.
    pub fusion_necessity: bool,
    #[serde(default = "default_blob_radius")]
    pub blob_radius_frac: f64,
    #[serde(default = "default_pixel_noise")]
    pub pixel_noise: f64,
}

fn default_blob_radius() -> f64 {
    0.22
}

fn default_pixel_noise() -> f64 {
    0.08
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VisualRule {
    pub class: String,
    /// Visual group; classes sharing a group are indistinguishable by image.
    pub group: usize,
    pub center: (f64, f64),
    pub radius: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthManifest {
    pub spec: SynthSpec,
    pub seed: u64,
    pub class_names: Vec<String>,
    pub informative_fields: Vec<String>,
    pub noise_fields: Vec<String>,
    pub visual_rules: Vec<VisualRule>,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub samples: Vec<Sample>,
    pub schema: MetadataSchema,
    pub class_names: Vec<String>,
    pub manifest: SynthManifest,
}

const PALETTE: [[f64; 3]; 8] = [
    [0.90, 0.15, 0.10],
    [0.10, 0.75, 0.20],
    [0.15, 0.25, 0.90],
    [0.92, 0.85, 0.10],
    [0.85, 0.15, 0.85],
    [0.10, 0.85, 0.85],
    [0.95, 0.55, 0.10],
    [0.55, 0.15, 0.80],
];

/// Flip probabilities cycled over the planted fields so their signal
/// strengths differ.
const SIGNAL_NOISE: [f64; 5] = [0.0, 0.05, 0.1, 0.0, 0.05];

fn informative_kind(i: usize) -> FieldKind {
    match i % 3 {
        0 => FieldKind::Binary,
        1 => FieldKind::Continuous { min: 0.0, max: 1.0 },
        _ => FieldKind::Categorical {
            levels: vec!["l0".into(), "l1".into(), "l2".into()],
        },
    }
}

/// Noise fields are six-level categoricals whose observed values stay in the
/// top three levels. Their one-hot slots are disjoint from every planted
/// field's slots, so planted and noise tokens cannot collide in embedding
/// space (metadata tokens carry no positional information to separate
/// same-content fields otherwise).
fn noise_kind() -> FieldKind {
    FieldKind::Categorical {
        levels: (0..6).map(|l| format!("n{l}")).collect(),
    }
}

fn build_schema(spec: &SynthSpec) -> Result<MetadataSchema> {
    let mut fields = Vec::new();
    for i in 0..spec.informative_fields {
        fields.push(FieldSpec {
            name: format!("signal_{i}"),
            kind: informative_kind(i),
        });
    }
    for i in 0..spec.noise_fields {
        fields.push(FieldSpec {
            name: format!("noise_{i}"),
            kind: noise_kind(),
        });
    }
    MetadataSchema::new(fields)
}

fn visual_rules(spec: &SynthSpec, class_names: &[String]) -> Vec<VisualRule> {
    let groups = if spec.fusion_necessity {
        spec.num_classes / 2
    } else {
        spec.num_classes
    };
    (0..spec.num_classes)
        .map(|class| {
            let group = if spec.fusion_necessity { class / 2 } else { class };
            let angle = std::f64::consts::TAU * group as f64 / groups as f64;
            VisualRule {
                class: class_names[class].clone(),
                group,
                center: (0.5 + 0.26 * angle.cos(), 0.5 + 0.26 * angle.sin()),
                radius: spec.blob_radius_frac,
                color: PALETTE[group % PALETTE.len()],
            }
        })
        .collect()
}

fn render(rule: &VisualRule, spec: &SynthSpec, rng: &mut rand_chacha::ChaCha8Rng) -> Tensor {
    let s = spec.image_size;
    let mut data = vec![0.0; 3 * s * s];
    let cx = rule.center.0 * s as f64;
    let cy = rule.center.1 * s as f64;
    let r = rule.radius * s as f64;
    for y in 0..s {
        for x in 0..s {
            let dist = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
            let inside = dist <= r;
            for c in 0..3 {
                let v = if inside {
                    rule.color[c] + 0.05 * normal(rng)
                } else {
                    spec.pixel_noise * rng.gen::<f64>()
                };
                data[c * s * s + y * s + x] = v.clamp(0.0, 1.0);
            }
        }
    }
    Tensor::new(vec![3, s, s], data).expect("render geometry")
}

fn signal_value(
    field: usize,
    signal: usize,
    kind: &FieldKind,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> MetaValue {
    // Odd-indexed planted fields carry the inverted bit, so both polarities
    // of the signal are always present as token content.
    let bit = (signal % 2) ^ (field % 2);
    let flip = SIGNAL_NOISE[field % SIGNAL_NOISE.len()];
    match kind {
        FieldKind::Binary => {
            let mut b = bit == 1;
            if rng.gen::<f64>() < flip {
                b = !b;
            }
            MetaValue::Bool(b)
        }
        FieldKind::Continuous { .. } => {
            let v = 0.25 + 0.5 * bit as f64 + 0.05 * normal(rng);
            MetaValue::Number(v.clamp(0.0, 1.0))
        }
        FieldKind::Categorical { .. } => {
            if rng.gen::<f64>() < 0.05 {
                MetaValue::Level(2)
            } else {
                MetaValue::Level(bit)
            }
        }
    }
}

fn noise_value(kind: &FieldKind, rng: &mut rand_chacha::ChaCha8Rng) -> MetaValue {
    match kind {
        FieldKind::Binary => MetaValue::Bool(rng.gen::<f64>() < 0.5),
        FieldKind::Continuous { .. } => MetaValue::Number(rng.gen::<f64>()),
        // Top half of the level set only; see `noise_kind`.
        FieldKind::Categorical { levels } => {
            MetaValue::Level(rng.gen_range(levels.len() / 2..levels.len()))
        }
    }
}

/// Deterministically generate the dataset described by `spec`.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<SyntheticDataset> {
    if spec.num_classes < 2 || spec.samples_per_class == 0 || spec.image_size == 0 {
        return Err(Error::InvalidConfig(
            "synthetic spec needs >= 2 classes, samples, and a positive image size".into(),
        ));
    }
    if spec.fusion_necessity && spec.num_classes % 2 != 0 {
        return Err(Error::InvalidConfig(
            "fusion necessity pairs classes, so the class count must be even".into(),
        ));
    }
    if spec.fusion_necessity && spec.informative_fields == 0 {
        return Err(Error::InvalidConfig(
            "fusion necessity needs planted metadata fields".into(),
        ));
    }
    let schema = build_schema(spec)?;
    let class_names: Vec<String> = (0..spec.num_classes).map(|c| format!("c{c:02}")).collect();
    let rules = visual_rules(spec, &class_names);
    let mut rng = seeded(seed);
    let mut samples = Vec::with_capacity(spec.num_classes * spec.samples_per_class);
    for class in 0..spec.num_classes {
        // The image only reveals the visual group; planted fields carry the
        // within-group parity when fusing, the class parity otherwise.
        let signal = if spec.fusion_necessity {
            class % 2
        } else {
            class
        };
        for i in 0..spec.samples_per_class {
            let image = render(&rules[class], spec, &mut rng);
            let mut metadata = Vec::with_capacity(schema.num_fields());
            for (f, field) in schema.fields.iter().enumerate() {
                let value = if f < spec.informative_fields {
                    signal_value(f, signal, &field.kind, &mut rng)
                } else {
                    noise_value(&field.kind, &mut rng)
                };
                metadata.push(value);
            }
            samples.push(Sample {
                id: format!("s{:04}", class * spec.samples_per_class + i),
                image,
                metadata,
                label: class,
            });
        }
    }
    let manifest = SynthManifest {
        spec: spec.clone(),
        seed,
        class_names: class_names.clone(),
        informative_fields: schema.field_names()[..spec.informative_fields].to_vec(),
        noise_fields: schema.field_names()[spec.informative_fields..].to_vec(),
        visual_rules: rules,
    };
    Ok(SyntheticDataset {
        samples,
        schema,
        class_names,
        manifest,
    })
}

fn format_value(value: &MetaValue, kind: &FieldKind) -> String {
    match (value, kind) {
        (MetaValue::Bool(true), _) => "True".into(),
        (MetaValue::Bool(false), _) => "False".into(),
        (MetaValue::Level(l), FieldKind::Categorical { levels }) => levels[*l].clone(),
        (MetaValue::Number(v), _) => format!("{v}"),
        (value, _) => panic!("value {value:?} inconsistent with schema"),
    }
}

/// Write a dataset as `metadata.csv` + `schema.json` + `images/*.ppm` +
/// `manifest.json` under `dir`.
pub fn write_dataset(ds: &SyntheticDataset, dir: &Path) -> Result<()> {
    let images = dir.join("images");
    std::fs::create_dir_all(&images)?;
    let mut csv = String::from("img_id");
    for name in ds.schema.field_names() {
        csv.push(',');
        csv.push_str(&name);
    }
    csv.push_str(",diagnostic\n");
    for sample in &ds.samples {
        let file = format!("{}.ppm", sample.id);
        write_ppm(&images.join(&file), &RgbImage::from_tensor(&sample.image)?)?;
        csv.push_str(&file);
        for (value, field) in sample.metadata.iter().zip(&ds.schema.fields) {
            csv.push(',');
            csv.push_str(&format_value(value, &field.kind));
        }
        csv.push(',');
        csv.push_str(&ds.class_names[sample.label]);
        csv.push('\n');
    }
    std::fs::write(dir.join("metadata.csv"), csv)?;
    std::fs::write(
        dir.join("schema.json"),
        serde_json::to_string_pretty(&ds.schema).map_err(|e| Error::Data(e.to_string()))?,
    )?;
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&ds.manifest).map_err(|e| Error::Data(e.to_string()))?,
    )?;
    Ok(())
}
