//! Binary tensor container (safetensors byte layout) and sidecar manifests.
//!
//! ```text
//! [u64 LE header length N][N bytes UTF-8 JSON header][payload]
//! ```
//!
//! The header maps tensor names to `{"dtype","shape","data_offsets"}` with
//! offsets relative to the payload start. Written files list tensors in
//! name order, pack the payload without gaps and pad the header with spaces
//! to a multiple of 8 bytes, so equal checkpoints give equal bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tipa_core::{AdapterCheckpoint, Dtype, LanguageId, Manifest, Tensor};

use crate::atomic_write;
use crate::error::{Error, Result};

const METADATA_KEY: &str = "__metadata__";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Up-cast F16/BF16 tensors to F32 instead of rejecting them.
    pub cast_f32: bool,
    /// Accept NaN/Inf values.
    pub allow_nonfinite: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderEntry {
    dtype: String,
    shape: Vec<usize>,
    data_offsets: [usize; 2],
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::MalformedContainer(reason.into())
}

/// Serialize tensors into container bytes.
pub fn encode(tensors: &BTreeMap<String, Tensor>) -> Vec<u8> {
    let mut header = BTreeMap::new();
    let mut offset = 0;
    for (name, t) in tensors {
        let end = offset + t.len() * Dtype::F32.size();
        header.insert(
            name.as_str(),
            HeaderEntry {
                dtype: Dtype::F32.to_string(),
                shape: t.shape().to_vec(),
                data_offsets: [offset, end],
            },
        );
        offset = end;
    }
    let mut json = serde_json::to_vec(&header).expect("header serializes");
    json.resize(json.len().next_multiple_of(8), b' ');

    let mut out = Vec::with_capacity(8 + json.len() + offset);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in tensors.values() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parse container bytes. Every byte after the header must belong to exactly one tensor.
pub fn decode(bytes: &[u8], options: ReadOptions) -> Result<BTreeMap<String, Tensor>> {
    let len_bytes: [u8; 8] = bytes
        .get(..8)
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| malformed("file shorter than the 8-byte header length"))?;
    let header_len = u64::from_le_bytes(len_bytes);
    let available = (bytes.len() - 8) as u64;
    if header_len > available {
        return Err(malformed(format!(
            "header length {header_len} exceeds the {available} bytes after it"
        )));
    }
    let header_end = 8 + header_len as usize;
    let header: serde_json::Map<String, serde_json::Value> =
        serde_json::from_slice(&bytes[8..header_end])
            .map_err(|e| malformed(format!("header is not a JSON object: {e}")))?;
    let payload = &bytes[header_end..];

    let mut spans = Vec::with_capacity(header.len());
    let mut entries = Vec::with_capacity(header.len());
    for (name, value) in header {
        if name == METADATA_KEY {
            let ok = value
                .as_object()
                .is_some_and(|m| m.values().all(serde_json::Value::is_string));
            if !ok {
                return Err(malformed("__metadata__ must map strings to strings"));
            }
            continue;
        }
        let entry: HeaderEntry = serde_json::from_value(value)
            .map_err(|e| malformed(format!("tensor `{name}`: {e}")))?;
        let dtype = match entry.dtype.as_str() {
            "F32" => Dtype::F32,
            "F16" => Dtype::F16,
            "BF16" => Dtype::BF16,
            other => {
                return Err(Error::UnsupportedDtype {
                    tensor: name,
                    dtype: other.to_string(),
                    hint: "",
                })
            }
        };
        if dtype != Dtype::F32 && !options.cast_f32 {
            return Err(Error::UnsupportedDtype {
                tensor: name,
                dtype: entry.dtype,
                hint: " (pass --cast-f32 to up-cast)",
            });
        }
        if entry.shape.contains(&0) {
            return Err(malformed(format!("tensor `{name}` has a zero-sized dimension")));
        }
        let [begin, end] = entry.data_offsets;
        let expected = entry
            .shape
            .iter()
            .try_fold(dtype.size(), |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| malformed(format!("tensor `{name}` shape overflows")))?;
        if begin > end || end > payload.len() {
            return Err(malformed(format!(
                "tensor `{name}` offsets [{begin}, {end}] outside the {}-byte payload",
                payload.len()
            )));
        }
        if end - begin != expected {
            return Err(malformed(format!(
                "tensor `{name}` spans {} bytes, shape {:?} {} needs {expected}",
                end - begin,
                entry.shape,
                dtype
            )));
        }
        spans.push((begin, end, name.clone()));
        entries.push((name, dtype, entry.shape, begin, end));
    }

    spans.sort();
    let mut cursor = 0;
    for (begin, end, name) in &spans {
        if *begin != cursor {
            return Err(malformed(format!(
                "tensor `{name}` starts at {begin}, expected {cursor} (gap or overlap)"
            )));
        }
        cursor = *end;
    }
    if cursor != payload.len() {
        return Err(malformed(format!(
            "{} trailing payload bytes not owned by any tensor",
            payload.len() - cursor
        )));
    }

    let mut tensors = BTreeMap::new();
    for (name, dtype, shape, begin, end) in entries {
        let raw = &payload[begin..end];
        let data: Vec<f32> = match dtype {
            Dtype::F32 => raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
            Dtype::F16 => raw
                .chunks_exact(2)
                .map(|c| half::f16::from_le_bytes([c[0], c[1]]).to_f32())
                .collect(),
            Dtype::BF16 => raw
                .chunks_exact(2)
                .map(|c| half::bf16::from_le_bytes([c[0], c[1]]).to_f32())
                .collect(),
        };
        if !options.allow_nonfinite && data.iter().any(|v| !v.is_finite()) {
            return Err(tipa_core::Error::NonfiniteInput(name).into());
        }
        let tensor = Tensor::new(shape, data).map_err(|e| malformed(format!("tensor `{name}`: {e}")))?;
        tensors.insert(name, tensor);
    }
    Ok(tensors)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `adapter.bin` -> `adapter.json`, `de.bin` -> `de.json`.
pub fn manifest_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("json")
}

/// Language implied by a checkpoint path: the file stem, or the parent
/// directory for `<lang>/adapter.bin`.
fn language_hint(path: &Path) -> Option<LanguageId> {
    let stem = path.file_stem()?.to_str()?;
    let name = if stem == "adapter" {
        path.parent()?.file_name()?.to_str()?
    } else {
        stem
    };
    LanguageId::new(name).ok()
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::malformed(path, e.to_string()))
}

pub fn manifest_bytes(manifest: &Manifest) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    bytes.push(b'\n');
    bytes
}

/// Load a checkpoint and its sidecar manifest (synthesized if absent).
pub fn read_checkpoint(path: &Path, options: ReadOptions) -> Result<AdapterCheckpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let tensors = decode(&bytes, options).map_err(|e| match e {
        Error::MalformedContainer(reason) => {
            Error::MalformedContainer(format!("{}: {reason}", path.display()))
        }
        other => other,
    })?;
    let sidecar = manifest_path(path);
    let manifest = if sidecar.is_file() {
        read_manifest(&sidecar)?
    } else {
        let lang = language_hint(path).map(|l| l.to_string()).unwrap_or_else(|| "und".to_string());
        Manifest::synthesized(&lang)
    };
    Ok(AdapterCheckpoint::new(tensors, manifest))
}

/// Files produced by [`write_checkpoint`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Written {
    pub checkpoint: PathBuf,
    pub checkpoint_sha256: String,
    pub manifest: PathBuf,
    pub manifest_sha256: String,
}

/// Write the container and its sidecar manifest, each via temp file + rename.
pub fn write_checkpoint(ckpt: &AdapterCheckpoint, path: &Path) -> Result<Written> {
    let bytes = encode(ckpt.tensors());
    let manifest = manifest_bytes(&ckpt.manifest);
    let sidecar = manifest_path(path);
    atomic_write(path, &bytes)?;
    atomic_write(&sidecar, &manifest)?;
    Ok(Written {
        checkpoint: path.to_path_buf(),
        checkpoint_sha256: sha256_hex(&bytes),
        manifest: sidecar,
        manifest_sha256: sha256_hex(&manifest),
    })
}
