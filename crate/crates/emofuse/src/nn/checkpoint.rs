//! Checkpoint serialization: a JSON manifest (names, shapes, dtypes, byte
//! offsets) plus one little-endian 32-bit-float blob.
//!
//! Round-trips are bit-exact: values are narrowed to `f32` on save and
//! widened back on load, so save -> load -> save reproduces both files
//! byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::params::ParamStore;
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "emofuse-checkpoint-v1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    /// Byte offset into the blob.
    pub offset: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub seed: u64,
    /// Model-level metadata (task, label set, vocabulary, dims, ...).
    pub meta: Value,
    /// Blob file name, relative to the manifest.
    pub blob: String,
    pub blob_len: u64,
    pub tensors: Vec<TensorRecord>,
}

/// Serialize a store to manifest JSON plus blob bytes.
pub fn encode(store: &ParamStore, meta: &Value, blob_name: &str) -> (String, Vec<u8>) {
    let mut tensors = Vec::new();
    let mut blob = Vec::new();
    for (name, entry) in store.iter() {
        tensors.push(TensorRecord {
            name: name.to_string(),
            shape: entry.shape.clone(),
            dtype: "f32".to_string(),
            offset: blob.len() as u64,
        });
        for &v in &entry.data {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: FORMAT_TAG.to_string(),
        seed: store.seed(),
        meta: meta.clone(),
        blob: blob_name.to_string(),
        blob_len: blob.len() as u64,
        tensors,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    (json, blob)
}

/// Parse manifest and blob bytes back into a store. Every offset and length
/// is validated before any allocation, so arbitrary input cannot panic or
/// balloon memory.
pub fn decode(manifest_bytes: &[u8], blob: &[u8]) -> Result<(ParamStore, Manifest)> {
    let manifest: Manifest = serde_json::from_slice(manifest_bytes)
        .map_err(|e| Error::parse("<manifest>", e.line(), e.to_string()))?;
    if manifest.format != FORMAT_TAG {
        return Err(Error::validation(format!(
            "unknown checkpoint format {:?}",
            manifest.format
        )));
    }
    if manifest.blob_len != blob.len() as u64 {
        return Err(Error::validation(format!(
            "blob length {} does not match manifest blob_len {}",
            blob.len(),
            manifest.blob_len
        )));
    }
    let mut store = ParamStore::new(manifest.seed);
    for record in &manifest.tensors {
        if record.dtype != "f32" {
            return Err(Error::validation(format!(
                "tensor {}: unsupported dtype {:?}",
                record.name, record.dtype
            )));
        }
        let numel = record
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::validation(format!("tensor {}: shape overflow", record.name)))?;
        let byte_len = numel
            .checked_mul(4)
            .ok_or_else(|| Error::validation(format!("tensor {}: size overflow", record.name)))?;
        let start = usize::try_from(record.offset)
            .map_err(|_| Error::validation(format!("tensor {}: offset overflow", record.name)))?;
        let end = start
            .checked_add(byte_len)
            .filter(|&e| e <= blob.len())
            .ok_or_else(|| {
                Error::validation(format!(
                    "tensor {}: range {}..{} exceeds blob of {} bytes",
                    record.name,
                    start,
                    start + byte_len,
                    blob.len()
                ))
            })?;
        let data: Vec<f64> = blob[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::validation(format!(
                "tensor {}: non-finite value in blob",
                record.name
            )));
        }
        store.insert(record.name.clone(), record.shape.clone(), data);
    }
    Ok((store, manifest))
}

/// Write `<dir>/<stem>.json` and `<dir>/<stem>.bin`.
pub fn save(store: &ParamStore, meta: &Value, dir: &Path, stem: &str) -> Result<PathBuf> {
    let blob_name = format!("{stem}.bin");
    let (json, blob) = encode(store, meta, &blob_name);
    fs::create_dir_all(dir)?;
    let manifest_path = dir.join(format!("{stem}.json"));
    fs::write(&manifest_path, json)?;
    fs::write(dir.join(&blob_name), blob)?;
    Ok(manifest_path)
}

/// Load from a manifest path; the blob is resolved relative to it.
pub fn load(manifest_path: &Path) -> Result<(ParamStore, Manifest)> {
    let manifest_bytes = fs::read(manifest_path)?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| Error::parse(manifest_path.display().to_string(), e.line(), e.to_string()))?;
    let blob_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&manifest.blob);
    let blob = fs::read(&blob_path)?;
    decode(&manifest_bytes, &blob)
}
