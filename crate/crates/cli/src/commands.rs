//! Command implementations behind the thin argument parser in `main`.

use crate::config::RunConfig;
use std::path::Path;
use vitatt_core::data::{
    apply_subset, correlation_ranking, generate_synthetic, load_dataset, ppm, select_metadata,
    stratified_split, write_dataset, MetadataSchema, Sample, SubsetMode, SynthSpec,
};
use vitatt_core::error::{Error, Result};
use vitatt_core::explain::{class_average_metadata_relevancy, explain_sample, render_saliency};
use vitatt_core::model::{
    encode_samples, load_checkpoint, save_checkpoint, CheckpointMeta, EncodedSample, ModelConfig,
    VitAttParams,
};
use vitatt_core::project::{collect_embeddings, separation_score, tsne_3d, EmbeddingSet, TsneConfig};
use vitatt_core::train::{evaluate, predict_probs, train, MetricsReport, TrainConfig};

pub fn cmd_synth(spec_path: &Path, out_dir: &Path, seed: u64) -> Result<()> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", spec_path.display())))?;
    let spec: SynthSpec = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", spec_path.display())))?;
    let dataset = generate_synthetic(&spec, seed)?;
    write_dataset(&dataset, out_dir)?;
    println!(
        "wrote {} samples across {} classes to {}",
        dataset.samples.len(),
        dataset.class_names.len(),
        out_dir.display()
    );
    Ok(())
}

struct LoadedData {
    samples: Vec<Sample>,
    class_names: Vec<String>,
    schema: MetadataSchema,
}

fn load_data_dir(data_dir: &Path, image_size: usize) -> Result<LoadedData> {
    let schema_text = std::fs::read_to_string(data_dir.join("schema.json"))
        .map_err(|e| Error::Data(format!("{}/schema.json: {e}", data_dir.display())))?;
    let schema: MetadataSchema = serde_json::from_str(&schema_text)
        .map_err(|e| Error::Data(format!("schema.json: {e}")))?;
    let loaded = load_dataset(
        &data_dir.join("metadata.csv"),
        &data_dir.join("images"),
        &schema,
        image_size,
    )?;
    for warning in &loaded.report.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(LoadedData {
        samples: loaded.samples,
        class_names: loaded.class_names,
        schema,
    })
}

fn format_cell(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.6}")
    }
}

fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("metric");
    for name in &report.class_names {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",avg\n");
    for (metric, values, macro_value) in report.rows() {
        out.push_str(metric);
        for v in values {
            out.push(',');
            out.push_str(&format_cell(v));
        }
        out.push(',');
        out.push_str(&format_cell(macro_value));
        out.push('\n');
    }
    out
}

fn write_metrics(path: &Path, report: &MetricsReport) -> Result<()> {
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    std::fs::write(path, metrics_csv(report))?;
    Ok(())
}

/// Field indices selected by the subset mode, computed on the train split.
fn subset_indices(
    mode: SubsetMode,
    train_split: &[Sample],
    schema: &MetadataSchema,
) -> Result<Vec<usize>> {
    match mode {
        SubsetMode::All => Ok((0..schema.num_fields()).collect()),
        _ => {
            let report = correlation_ranking(train_split, schema)?;
            select_metadata(&report, mode)
        }
    }
}

struct PreparedData {
    config: ModelConfig,
    schema: MetadataSchema,
    class_names: Vec<String>,
    /// Encoded train/val/test splits.
    splits: Vec<Vec<EncodedSample>>,
}

fn prepare(config: &RunConfig) -> Result<PreparedData> {
    let data = load_data_dir(&config.data_dir, config.model.image_size)?;
    let splits = stratified_split(&data.samples, &config.split.ratios, config.split.seed)?;
    let indices = subset_indices(config.metadata_subset, &splits[0], &data.schema)?;
    let schema = data.schema.subset(&indices)?;
    let model_config = config.model.to_config(
        data.class_names.len(),
        schema.num_fields().max(1),
        schema.slot_width().max(1),
    );
    model_config.validate()?;
    let encoded = splits
        .iter()
        .map(|s| encode_samples(&apply_subset(s, &indices), &schema, &model_config))
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedData {
        config: model_config,
        schema,
        class_names: data.class_names,
        splits: encoded,
    })
}

fn history_csv(history: &[vitatt_core::train::EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_macro_acc\n");
    for stats in history {
        out.push_str(&format!(
            "{},{},{}\n",
            stats.epoch, stats.train_loss, stats.val_macro_acc
        ));
    }
    out
}

pub fn cmd_train(config: &RunConfig, repeats: usize) -> Result<()> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be >= 1".into()));
    }
    config.validate()?;
    let prepared = prepare(config)?;
    std::fs::create_dir_all(&config.out_dir)?;
    config.write_provenance(&config.out_dir)?;

    let meta = CheckpointMeta {
        model: prepared.config.clone(),
        schema: prepared.schema.clone(),
        class_names: prepared.class_names.clone(),
        split_ratios: config.split.ratios.clone(),
        split_seed: config.split.seed,
        subset_fields: match config.metadata_subset {
            SubsetMode::All => None,
            _ => Some(prepared.schema.field_names()),
        },
    };

    let mut test_reports = Vec::new();
    for run in 0..repeats {
        let run_dir = if repeats == 1 {
            config.out_dir.clone()
        } else {
            let dir = config.out_dir.join(format!("run_{run}"));
            std::fs::create_dir_all(&dir)?;
            dir
        };
        let train_config = TrainConfig {
            seed: config.train.seed + run as u64,
            ..config.train.clone()
        };
        let outcome = train(
            &prepared.config,
            &train_config,
            &prepared.splits[0],
            &prepared.splits[1],
        )?;
        save_checkpoint(&run_dir.join("checkpoint.ckpt"), &meta, &outcome.best_params)?;
        std::fs::write(run_dir.join("history.csv"), history_csv(&outcome.history))?;
        println!(
            "run {run}: best val macro-ACC {:.4} at epoch {}",
            outcome.best_val_acc, outcome.best_epoch
        );
        if repeats > 1 {
            let report = evaluate(
                &prepared.config,
                &outcome.best_params,
                &prepared.splits[2],
                &prepared.class_names,
            )?;
            write_metrics(&run_dir.join("metrics_test.csv"), &report)?;
            test_reports.push(report);
        }
    }
    if repeats > 1 {
        let mut out = String::from("metric,avg_over_runs\n");
        for (i, metric) in ["ACC", "PRE", "SEN", "SPE", "AUC"].iter().enumerate() {
            let mean: f64 = test_reports
                .iter()
                .map(|r| r.rows()[i].2)
                .sum::<f64>()
                / test_reports.len() as f64;
            out.push_str(&format!("{metric},{}\n", format_cell(mean)));
        }
        std::fs::write(config.out_dir.join("metrics_mean.csv"), out)?;
    }
    Ok(())
}

fn split_index(name: &str) -> Result<usize> {
    match name {
        "train" => Ok(0),
        "val" => Ok(1),
        "test" => Ok(2),
        other => Err(Error::InvalidConfig(format!(
            "unknown split {other:?}; expected train, val, or test"
        ))),
    }
}

struct CheckpointData {
    meta: CheckpointMeta,
    params: VitAttParams,
    /// Raw and encoded samples of the requested split.
    raw: Vec<Sample>,
    encoded: Vec<EncodedSample>,
}

/// Rebuild the exact training-time split and field subset for a checkpoint.
fn load_for_checkpoint(ckpt: &Path, data_dir: &Path, split: &str) -> Result<CheckpointData> {
    let (meta, params) = load_checkpoint(ckpt)?;
    let data = load_data_dir(data_dir, meta.model.image_size)?;
    if data.class_names != meta.class_names {
        return Err(Error::Checkpoint(format!(
            "dataset classes {:?} do not match checkpoint classes {:?}",
            data.class_names, meta.class_names
        )));
    }
    let splits = stratified_split(&data.samples, &meta.split_ratios, meta.split_seed)?;
    let wanted = splits[split_index(split)?].clone();
    let indices: Vec<usize> = meta
        .schema
        .field_names()
        .iter()
        .map(|name| {
            data.schema
                .fields
                .iter()
                .position(|f| f.name == *name)
                .ok_or_else(|| {
                    Error::Checkpoint(format!("dataset is missing trained field {name:?}"))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let raw = apply_subset(&wanted, &indices);
    let encoded = encode_samples(&raw, &meta.schema, &meta.model)?;
    Ok(CheckpointData {
        meta,
        params,
        raw,
        encoded,
    })
}

pub fn cmd_eval(ckpt: &Path, data_dir: &Path, split: &str, out_dir: &Path) -> Result<()> {
    let data = load_for_checkpoint(ckpt, data_dir, split)?;
    let report = evaluate(
        &data.meta.model,
        &data.params,
        &data.encoded,
        &data.meta.class_names,
    )?;
    std::fs::create_dir_all(out_dir)?;
    write_metrics(&out_dir.join(format!("metrics_{split}.csv")), &report)?;
    print!("{}", metrics_csv(&report));
    Ok(())
}

pub fn cmd_explain(
    ckpt: &Path,
    data_dir: &Path,
    split: &str,
    ids: Option<&str>,
    class_average: bool,
    out_dir: &Path,
) -> Result<()> {
    let data = load_for_checkpoint(ckpt, data_dir, split)?;
    std::fs::create_dir_all(out_dir)?;
    if class_average {
        let report = class_average_metadata_relevancy(
            &data.meta.model,
            &data.params,
            &data.raw,
            &data.meta.schema,
            &data.meta.class_names,
        )?;
        for warning in &report.warnings {
            eprintln!("warning: {warning}");
        }
        let mut csv = String::from("class");
        for field in &report.field_names {
            csv.push(',');
            csv.push_str(field);
        }
        csv.push('\n');
        for (class, row) in report.class_names.iter().zip(&report.scores) {
            csv.push_str(class);
            for v in row {
                csv.push(',');
                csv.push_str(&format_cell(*v));
            }
            csv.push('\n');
        }
        std::fs::write(out_dir.join("metadata_relevancy.csv"), csv)?;
        let mut summaries = String::from("class");
        for field in &report.field_names {
            summaries.push(',');
            summaries.push_str(field);
        }
        summaries.push('\n');
        for (class, row) in report.class_names.iter().zip(&report.summaries) {
            summaries.push_str(class);
            for cell in row {
                summaries.push(',');
                summaries.push_str(cell);
            }
            summaries.push('\n');
        }
        std::fs::write(out_dir.join("metadata_summaries.csv"), summaries)?;
        return Ok(());
    }
    let Some(ids) = ids else {
        return Err(Error::InvalidConfig(
            "explain needs --ids or --class-average".into(),
        ));
    };
    let probs = predict_probs(&data.meta.model, &data.params, &data.encoded)?;
    let mut relevancy_csv = String::from("id,true_class,predicted_class");
    for field in data.meta.schema.field_names() {
        relevancy_csv.push(',');
        relevancy_csv.push_str(&field);
    }
    relevancy_csv.push('\n');
    for id in ids.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let index = data
            .raw
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| Error::Data(format!("sample {id:?} not in the {split} split")))?;
        let predicted = probs[index]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (map, _) = explain_sample(&data.meta.model, &data.params, &data.encoded[index], predicted)?;
        let image = render_saliency(&map, &data.raw[index].image)?;
        let stem = id.trim_end_matches(".ppm");
        ppm::write_ppm(
            &out_dir.join(format!("saliency_{stem}_class{predicted}.ppm")),
            &image,
        )?;
        relevancy_csv.push_str(&format!(
            "{id},{},{}",
            data.meta.class_names[data.raw[index].label], data.meta.class_names[predicted]
        ));
        for v in &map.metadata_scores {
            relevancy_csv.push(',');
            relevancy_csv.push_str(&format_cell(*v));
        }
        relevancy_csv.push('\n');
    }
    std::fs::write(out_dir.join("per_sample_relevancy.csv"), relevancy_csv)?;
    Ok(())
}

fn coords_csv(set: &EmbeddingSet, coords: &[[f64; 3]]) -> String {
    let mut out = String::from("id,x,y,z,label,stage\n");
    for ((id, coord), label) in set.ids.iter().zip(coords).zip(&set.labels) {
        out.push_str(&format!(
            "{id},{},{},{},{label},{}\n",
            coord[0], coord[1], coord[2], set.stage
        ));
    }
    out
}

/// 2-D scatter of the first two embedding coordinates, colored by label.
fn scatter_image(coords: &[[f64; 3]], labels: &[usize]) -> vitatt_core::data::RgbImage {
    const SIZE: usize = 256;
    const COLORS: [[u8; 3]; 8] = [
        [230, 60, 50],
        [60, 180, 75],
        [50, 90, 235],
        [240, 220, 50],
        [220, 60, 220],
        [70, 220, 220],
        [245, 140, 30],
        [145, 60, 210],
    ];
    let mut img = vitatt_core::data::RgbImage::new(SIZE, SIZE);
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in coords {
        min_x = min_x.min(c[0]);
        max_x = max_x.max(c[0]);
        min_y = min_y.min(c[1]);
        max_y = max_y.max(c[1]);
    }
    let span_x = (max_x - min_x).max(1e-12);
    let span_y = (max_y - min_y).max(1e-12);
    for (c, &label) in coords.iter().zip(labels) {
        let x = ((c[0] - min_x) / span_x * (SIZE - 5) as f64) as usize + 2;
        let y = ((c[1] - min_y) / span_y * (SIZE - 5) as f64) as usize + 2;
        let color = COLORS[label % COLORS.len()];
        for dy in 0..2 {
            for dx in 0..2 {
                img.set(x + dx, y + dy, color);
            }
        }
    }
    img
}

pub fn cmd_project(
    ckpt: &Path,
    data_dir: &Path,
    split: &str,
    out_dir: &Path,
    tsne: &TsneConfig,
) -> Result<()> {
    let data = load_for_checkpoint(ckpt, data_dir, split)?;
    let (pre, post) = collect_embeddings(&data.meta.model, &data.params, &data.encoded)?;
    let n = pre.vectors.len();
    let mut tsne = tsne.clone();
    if tsne.perplexity >= n as f64 / 3.0 {
        let clamped = (n as f64 / 3.0 - 1.0).max(1.5);
        eprintln!(
            "warning: perplexity {} too large for {n} samples, clamping to {clamped}",
            tsne.perplexity
        );
        tsne.perplexity = clamped;
    }
    std::fs::create_dir_all(out_dir)?;
    let mut scores = serde_json::Map::new();
    for set in [&pre, &post] {
        let result = tsne_3d(&set.vectors, &tsne)?;
        std::fs::write(
            out_dir.join(format!("coords_{}.csv", set.stage)),
            coords_csv(set, &result.coords),
        )?;
        ppm::write_ppm(
            &out_dir.join(format!("scatter_{}.ppm", set.stage)),
            &scatter_image(&result.coords, &set.labels),
        )?;
        let embedded: Vec<Vec<f64>> = result.coords.iter().map(|c| c.to_vec()).collect();
        let mut entry = serde_json::Map::new();
        entry.insert(
            "silhouette_raw".into(),
            separation_score(&set.vectors, &set.labels)?.into(),
        );
        entry.insert(
            "silhouette_tsne".into(),
            separation_score(&embedded, &set.labels)?.into(),
        );
        entry.insert(
            "final_kl".into(),
            result.kl_history.last().copied().unwrap_or(f64::NAN).into(),
        );
        scores.insert(set.stage.to_string(), entry.into());
    }
    std::fs::write(
        out_dir.join("scores.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(scores))
            .map_err(|e| Error::Data(e.to_string()))?,
    )?;
    Ok(())
}

pub fn cmd_select_metadata(config: &RunConfig, mode: SubsetMode, out_dir: &Path) -> Result<()> {
    config.validate()?;
    let data = load_data_dir(&config.data_dir, config.model.image_size)?;
    let splits = stratified_split(&data.samples, &config.split.ratios, config.split.seed)?;
    let report = correlation_ranking(&splits[0], &data.schema)?;
    std::fs::create_dir_all(out_dir)?;
    let mut csv = String::from("field,coefficient,rank\n");
    for (rank, &field) in report.ranking.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{}\n",
            report.field_names[field], report.coefficients[field], rank
        ));
    }
    std::fs::write(out_dir.join("correlation.csv"), csv)?;
    let selected = select_metadata(&report, mode)?;
    let names: Vec<&str> = selected
        .iter()
        .map(|&i| report.field_names[i].as_str())
        .collect();
    println!("{mode}: {}", names.join(","));
    Ok(())
}
