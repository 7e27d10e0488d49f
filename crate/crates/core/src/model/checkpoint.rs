//! Versioned binary checkpoint: a JSON metadata header followed by named
//! flat weight arrays. Byte-identical for identical inputs.

use super::{ModelConfig, VitAttParams};
use crate::data::MetadataSchema;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const CKPT_MAGIC: &[u8] = b"VITATT-CKPT-1\n";

/// Everything needed to reuse a trained model: the architecture, the
/// (possibly subset) metadata schema it was trained with, the class order,
/// and the split recipe so later commands can rebuild the exact partitions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub schema: MetadataSchema,
    pub class_names: Vec<String>,
    pub split_ratios: Vec<f64>,
    pub split_seed: u64,
    /// Field names kept when training on a metadata subset.
    pub subset_fields: Option<Vec<String>>,
}

fn arrays(params: &VitAttParams) -> Vec<(String, Vec<f64>)> {
    let mut out: Vec<(String, Vec<f64>)> = params
        .visit()
        .into_iter()
        .map(|(name, _, t)| (name, t.data().to_vec()))
        .collect();
    out.push((
        "head.bn.running_mean".into(),
        params.head.bn.running_mean.clone(),
    ));
    out.push((
        "head.bn.running_var".into(),
        params.head.bn.running_var.clone(),
    ));
    out
}

pub fn save_checkpoint(path: &Path, meta: &CheckpointMeta, params: &VitAttParams) -> Result<()> {
    let meta_json =
        serde_json::to_vec(meta).map_err(|e| Error::Checkpoint(format!("meta encode: {e}")))?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(CKPT_MAGIC)?;
    file.write_all(&(meta_json.len() as u32).to_le_bytes())?;
    file.write_all(&meta_json)?;
    let arrays = arrays(params);
    file.write_all(&(arrays.len() as u32).to_le_bytes())?;
    for (name, data) in arrays {
        let name_bytes = name.as_bytes();
        file.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        file.write_all(name_bytes)?;
        file.write_all(&(data.len() as u32).to_le_bytes())?;
        for v in data {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointMeta, VitAttParams)> {
    let mut file = std::io::BufReader::new(
        std::fs::File::open(path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?,
    );
    let mut magic = vec![0u8; CKPT_MAGIC.len()];
    file.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short for magic".into()))?;
    if magic != CKPT_MAGIC {
        return Err(Error::Checkpoint(
            "bad magic; not a VITATT-CKPT-1 checkpoint".into(),
        ));
    }
    let meta_len = read_u32(&mut file)? as usize;
    let mut meta_json = vec![0u8; meta_len];
    file.read_exact(&mut meta_json)
        .map_err(|_| Error::Checkpoint("truncated metadata".into()))?;
    let meta: CheckpointMeta = serde_json::from_slice(&meta_json)
        .map_err(|e| Error::Checkpoint(format!("meta decode: {e}")))?;
    meta.model.validate()?;

    let mut params = VitAttParams::init(&meta.model, 0);
    let count = read_u32(&mut file)? as usize;
    let mut loaded = std::collections::HashMap::new();
    for _ in 0..count {
        let name_len = read_u16(&mut file)? as usize;
        let mut name = vec![0u8; name_len];
        file.read_exact(&mut name)
            .map_err(|_| Error::Checkpoint("truncated array name".into()))?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Checkpoint("array name is not UTF-8".into()))?;
        let len = read_u32(&mut file)? as usize;
        let mut data = vec![0.0f64; len];
        let mut buf = [0u8; 8];
        for v in &mut data {
            file.read_exact(&mut buf)
                .map_err(|_| Error::Checkpoint(format!("truncated array {name}")))?;
            *v = f64::from_le_bytes(buf);
        }
        loaded.insert(name, data);
    }
    for (name, _, tensor) in params.visit_mut() {
        let data = loaded
            .remove(&name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))?;
        if data.len() != tensor.numel() {
            return Err(Error::Checkpoint(format!(
                "array {name} has {} elements, expected {}",
                data.len(),
                tensor.numel()
            )));
        }
        tensor.data_mut().copy_from_slice(&data);
        tensor.grad = None;
    }
    for (key, dst) in [
        ("head.bn.running_mean", &mut params.head.bn.running_mean),
        ("head.bn.running_var", &mut params.head.bn.running_var),
    ] {
        let data = loaded
            .remove(key)
            .ok_or_else(|| Error::Checkpoint(format!("missing array {key}")))?;
        if data.len() != dst.len() {
            return Err(Error::Checkpoint(format!("array {key} has wrong length")));
        }
        *dst = data;
    }
    if !loaded.is_empty() {
        let mut extra: Vec<String> = loaded.into_keys().collect();
        extra.sort();
        return Err(Error::Checkpoint(format!(
            "unexpected arrays in checkpoint: {}",
            extra.join(", ")
        )));
    }
    Ok((meta, params))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Checkpoint("truncated length field".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut buf = [0u8; 2];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Checkpoint("truncated length field".into()))?;
    Ok(u16::from_le_bytes(buf))
}
