//! Binary model checkpoints.
//!
//! Layout: `PSZCKPT1`, u32 version, u32 metadata length, TOML metadata,
//! every parameter as little-endian f64 in storage order, then a CRC-32 of
//! all preceding bytes.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::provenance::Provenance;
use crate::error::{CheckpointFault, Error, Result};
use crate::nn::{Architecture, Layer, LayerSpec, LayerWeights, Model};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PSZCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamMeta {
    layer: usize,
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointMeta {
    architecture: Architecture,
    input_shape: [usize; 2],
    provenance: Provenance,
    layers: Vec<LayerSpec>,
    params: Vec<ParamMeta>,
}

impl CheckpointMeta {
    fn blob_values(&self) -> usize {
        self.params.iter().map(|p| p.shape.iter().product::<usize>()).sum()
    }
}

/// A loaded checkpoint: the model plus how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub provenance: Provenance,
}

pub fn encode_checkpoint(model: &Model, provenance: &Provenance) -> Result<Vec<u8>> {
    model.validate()?;
    let meta = CheckpointMeta {
        architecture: model.architecture,
        input_shape: model.input_shape,
        provenance: provenance.clone(),
        layers: model.specs(),
        params: model
            .layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.weights.params.iter().map(move |p| ParamMeta {
                    layer: i,
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                })
            })
            .collect(),
    };
    let text = toml::to_string(&meta)
        .map_err(|e| Error::Contract(format!("checkpoint metadata: {e}")))?;
    let meta_len = u32::try_from(text.len())
        .map_err(|_| Error::Contract("checkpoint metadata too large".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + text.len() + model.num_parameters() * 8 + 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&meta_len.to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    for p in model.params() {
        for v in p.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn fault(f: CheckpointFault, msg: impl Into<String>) -> Error {
    Error::checkpoint(f, msg)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Decodes a checkpoint. With `expected` set, a checkpoint of another
/// architecture is rejected.
pub fn decode_checkpoint(bytes: &[u8], expected: Option<Architecture>) -> Result<Checkpoint> {
    if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(fault(CheckpointFault::NotACheckpoint, "not a checkpoint: bad magic"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(fault(CheckpointFault::Truncated, "checkpoint truncated inside the header"));
    }
    let version = u32_at(bytes, 8);
    if version != CHECKPOINT_VERSION {
        return Err(fault(
            CheckpointFault::VersionMismatch,
            format!("checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"),
        ));
    }
    let meta_len = u32_at(bytes, 12) as usize;
    let meta_end = HEADER_LEN.saturating_add(meta_len);
    if bytes.len() < meta_end.saturating_add(4) {
        return Err(fault(
            CheckpointFault::Truncated,
            format!("checkpoint truncated: {} bytes, metadata alone needs {}", bytes.len(), meta_end + 4),
        ));
    }
    let meta: Option<CheckpointMeta> = std::str::from_utf8(&bytes[HEADER_LEN..meta_end])
        .ok()
        .and_then(|t| toml::from_str(t).ok());
    let expected_len = meta.as_ref().map(|m| meta_end + m.blob_values() * 8 + 4);

    let body = &bytes[..bytes.len() - 4];
    let stored = u32_at(bytes, bytes.len() - 4);
    if crc32fast::hash(body) != stored {
        if expected_len.is_some_and(|n| bytes.len() < n) {
            return Err(fault(
                CheckpointFault::Truncated,
                format!("checkpoint truncated: {} of {} bytes", bytes.len(), expected_len.unwrap_or(0)),
            ));
        }
        return Err(fault(CheckpointFault::ChecksumMismatch, "checkpoint checksum mismatch"));
    }
    let meta = meta.ok_or_else(|| fault(CheckpointFault::Malformed, "checkpoint metadata is unreadable"))?;
    if expected_len != Some(bytes.len()) {
        return Err(fault(
            CheckpointFault::Malformed,
            format!("checkpoint is {} bytes but its metadata describes {}", bytes.len(), expected_len.unwrap_or(0)),
        ));
    }
    if let Some(want) = expected {
        if want != meta.architecture {
            return Err(fault(
                CheckpointFault::ArchitectureMismatch,
                format!("checkpoint holds a {} model, expected {want}", meta.architecture),
            ));
        }
    }

    let mut layers: Vec<Layer> = meta
        .layers
        .iter()
        .map(|spec| Layer {
            spec: spec.clone(),
            weights: LayerWeights::default(),
        })
        .collect();
    let mut offset = meta_end;
    for p in &meta.params {
        let n: usize = p.shape.iter().product();
        let values: Vec<f64> = bytes[offset..offset + n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        offset += n * 8;
        let layer = layers.get_mut(p.layer).ok_or_else(|| {
            fault(CheckpointFault::Malformed, format!("parameter {} names missing layer {}", p.name, p.layer))
        })?;
        layer.weights.params.push(crate::nn::Param {
            name: p.name.clone(),
            shape: p.shape.clone(),
            data: Arc::new(values),
        });
    }
    let model = Model {
        architecture: meta.architecture,
        input_shape: meta.input_shape,
        layers,
    };
    model
        .validate()
        .map_err(|e| fault(CheckpointFault::Malformed, format!("checkpoint model is invalid: {e}")))?;
    Ok(Checkpoint {
        model,
        provenance: meta.provenance,
    })
}

pub fn save_checkpoint(model: &Model, provenance: &Provenance, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(model, provenance)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path, expected: Option<Architecture>) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, expected).map_err(|e| match e {
        Error::Checkpoint { fault, message } => Error::Checkpoint {
            fault,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}
