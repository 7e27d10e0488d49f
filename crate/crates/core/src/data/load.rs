//! CSV + image-folder ingestion.
//!
//! The CSV carries one row per lesion with an `img_id` column naming the
//! image file, one column per schema field, and the class in a `diagnostic`
//! column. Rows with any undefined value are dropped and counted; structural
//! problems (missing columns, unparseable values, unknown categorical
//! levels, missing image files) are hard errors naming the row.

use super::ppm::read_ppm;
use super::{FieldKind, MetaValue, MetadataSchema, Sample};
use crate::error::{Error, Result};
use std::path::Path;

/// Markers treated as an undefined metadata point.
const UNDEFINED: &[&str] = &["", "unk", "unknown", "na", "nan"];

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub total_rows: usize,
    pub dropped_rows: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub samples: Vec<Sample>,
    /// Sorted unique diagnostic values; sample labels index into this.
    pub class_names: Vec<String>,
    pub report: LoadReport,
}

fn is_undefined(raw: &str) -> bool {
    UNDEFINED.contains(&raw.trim().to_ascii_lowercase().as_str())
}

fn parse_value(raw: &str, kind: &FieldKind, field: &str, row: usize) -> Result<MetaValue> {
    match kind {
        FieldKind::Binary => match raw.trim().to_ascii_lowercase().as_str() {
            "true" | "1" => Ok(MetaValue::Bool(true)),
            "false" | "0" => Ok(MetaValue::Bool(false)),
            _ => Err(Error::MalformedRow {
                row,
                reason: format!("field {field:?}: {raw:?} is not a boolean"),
            }),
        },
        FieldKind::Categorical { levels } => levels
            .iter()
            .position(|l| l == raw.trim())
            .map(MetaValue::Level)
            .ok_or_else(|| Error::UnknownLevel {
                row,
                field: field.to_string(),
                value: raw.trim().to_string(),
            }),
        FieldKind::Continuous { .. } => raw
            .trim()
            .parse()
            .map(MetaValue::Number)
            .map_err(|_| Error::MalformedRow {
                row,
                reason: format!("field {field:?}: {raw:?} is not a number"),
            }),
    }
}

/// Load a dataset, dropping rows with undefined values and decoding each
/// referenced image (center crop to square, bilinear resize to
/// `image_size`, pixels scaled to [0, 1]).
pub fn load_dataset(
    csv_path: &Path,
    image_dir: &Path,
    schema: &MetadataSchema,
    image_size: usize,
) -> Result<LoadedDataset> {
    let mut reader = csv::Reader::from_path(csv_path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("CSV is missing column {name:?}")))
    };
    let id_col = col("img_id")?;
    let diag_col = col("diagnostic")?;
    let field_cols: Vec<usize> = schema
        .fields
        .iter()
        .map(|f| col(&f.name))
        .collect::<Result<Vec<_>>>()?;

    struct RawRow {
        id: String,
        values: Vec<MetaValue>,
        diagnostic: String,
    }

    let mut report = LoadReport::default();
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        report.total_rows += 1;
        let get = |c: usize| -> Result<&str> {
            record.get(c).ok_or_else(|| Error::MalformedRow {
                row,
                reason: "too few columns".into(),
            })
        };
        let id = get(id_col)?.trim().to_string();
        let diagnostic = get(diag_col)?.trim().to_string();
        let mut defined = !id.is_empty() && !is_undefined(&diagnostic);
        let mut values = Vec::with_capacity(schema.num_fields());
        for (spec, &c) in schema.fields.iter().zip(&field_cols) {
            let raw = get(c)?;
            if is_undefined(raw) {
                defined = false;
                break;
            }
            values.push(parse_value(raw, &spec.kind, &spec.name, row)?);
        }
        if !defined {
            report.dropped_rows += 1;
            continue;
        }
        rows.push(RawRow {
            id,
            values,
            diagnostic,
        });
    }
    if report.dropped_rows > 0 {
        report.warnings.push(format!(
            "dropped {} of {} rows with undefined metadata",
            report.dropped_rows, report.total_rows
        ));
    }

    let mut class_names: Vec<String> = rows.iter().map(|r| r.diagnostic.clone()).collect();
    class_names.sort();
    class_names.dedup();

    let mut samples = Vec::with_capacity(rows.len());
    for row in rows {
        let image = read_ppm(&image_dir.join(&row.id))?
            .center_crop_square()
            .resize(image_size, image_size)
            .to_tensor()?;
        let label = class_names
            .iter()
            .position(|c| *c == row.diagnostic)
            .expect("diagnostic collected above");
        samples.push(Sample {
            id: row.id,
            image,
            metadata: row.values,
            label,
        });
    }
    Ok(LoadedDataset {
        samples,
        class_names,
        report,
    })
}
