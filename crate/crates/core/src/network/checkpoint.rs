//! Checkpoint files: a one-line JSON manifest (format tag, architecture,
//! tensor directory) followed by raw little-endian 32-bit float tensor data
//! in manifest order. Values are rounded to 32 bits on save; loading returns
//! exactly those rounded values, so save-then-load is bit-stable, and a
//! second save of loaded weights reproduces the file byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::network::{ModelWeights, NetworkConfig, NetworkError};

/// Format tag of the checkpoint container.
pub const FORMAT_TAG: &str = "equidesc-ckpt-v1";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the payload region (which starts right after the
    /// manifest's terminating newline).
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainStateMeta {
    iteration: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    config: NetworkConfig,
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    train_state: Option<TrainStateMeta>,
}

/// Optimizer state carried inside a checkpoint so an interrupted run can
/// pick up its iteration counter and moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStateBlob {
    /// Completed optimizer steps.
    pub iteration: u64,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
}

/// Tensor names and lengths in canonical parameter order for `config`.
fn tensor_directory(config: &NetworkConfig) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for (i, layer) in config.layers.iter().enumerate() {
        out.push((format!("encoder.{i}.filters"), layer.filter_shape()));
        out.push((format!("encoder.{i}.bias"), vec![layer.out_channels]));
    }
    for (i, (din, dout)) in config.decoder_dims().into_iter().enumerate() {
        out.push((format!("decoder.{i}.weight"), vec![din, dout]));
        out.push((format!("decoder.{i}.bias"), vec![dout]));
    }
    out
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Writes `weights` (and optionally training state) to `path`, rounding
/// every value through 32-bit precision.
pub fn save_checkpoint(
    path: &Path,
    weights: &ModelWeights,
    train_state: Option<&TrainStateBlob>,
) -> Result<(), NetworkError> {
    weights.config.validate()?;
    let mut dir = tensor_directory(&weights.config);
    let mut values: Vec<f64> = Vec::new();
    weights.visit_params(|v| values.push(v));
    if let Some(ts) = train_state {
        let n = values.len();
        if ts.adam_m.len() != n || ts.adam_v.len() != n {
            return Err(NetworkError::ShapeMismatch(format!(
                "optimizer moment length {} does not match parameter count {n}",
                ts.adam_m.len()
            )));
        }
        dir.push(("adam.m".into(), vec![n]));
        dir.push(("adam.v".into(), vec![n]));
        values.extend_from_slice(&ts.adam_m);
        values.extend_from_slice(&ts.adam_v);
    }

    let mut tensors = Vec::with_capacity(dir.len());
    let mut offset = 0usize;
    for (name, shape) in &dir {
        tensors.push(TensorEntry {
            name: name.clone(),
            shape: shape.clone(),
            offset,
        });
        offset += 4 * numel(shape);
    }
    let manifest = Manifest {
        format: FORMAT_TAG.into(),
        config: weights.config.clone(),
        tensors,
        train_state: train_state.map(|ts| TrainStateMeta {
            iteration: ts.iteration,
        }),
    };

    let mut bytes = serde_json::to_string(&manifest)
        .map_err(|e| NetworkError::CorruptManifest(format!("serialize: {e}")))?
        .into_bytes();
    bytes.push(b'\n');
    bytes.reserve(4 * values.len());
    for v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads a checkpoint back; the three failure modes — unreadable manifest,
/// tensor directory not matching the declared architecture, payload shorter
/// than the directory requires — surface as distinct errors.
pub fn load_checkpoint(
    path: &Path,
) -> Result<(ModelWeights, Option<TrainStateBlob>), NetworkError> {
    let bytes = fs::read(path)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| NetworkError::CorruptManifest("no manifest terminator".into()))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| NetworkError::CorruptManifest(e.to_string()))?;
    if manifest.format != FORMAT_TAG {
        return Err(NetworkError::CorruptManifest(format!(
            "unsupported format tag {:?}",
            manifest.format
        )));
    }
    manifest.config.validate()?;
    let payload = &bytes[newline + 1..];

    // The tensor directory must list exactly the canonical tensors (plus
    // optimizer moments when training state is present), in order.
    let mut expected = tensor_directory(&manifest.config);
    let mut weights = ModelWeights::zeros(&manifest.config)?;
    let param_count = weights.param_count();
    if manifest.train_state.is_some() {
        expected.push(("adam.m".into(), vec![param_count]));
        expected.push(("adam.v".into(), vec![param_count]));
    }
    if manifest.tensors.len() != expected.len() {
        return Err(NetworkError::CorruptManifest(format!(
            "expected {} tensors, manifest lists {}",
            expected.len(),
            manifest.tensors.len()
        )));
    }
    for (entry, (name, shape)) in manifest.tensors.iter().zip(expected.iter()) {
        if &entry.name != name {
            return Err(NetworkError::CorruptManifest(format!(
                "unexpected tensor {:?} where {:?} should be",
                entry.name, name
            )));
        }
        if &entry.shape != shape {
            return Err(NetworkError::ShapeMismatch(format!(
                "tensor {:?}: manifest says {:?}, architecture requires {:?}",
                entry.name, entry.shape, shape
            )));
        }
    }

    let read_tensor = |entry: &TensorEntry| -> Result<Vec<f64>, NetworkError> {
        let len = numel(&entry.shape);
        let end = entry
            .offset
            .checked_add(4 * len)
            .ok_or(NetworkError::TruncatedPayload {
                expected: usize::MAX,
                got: payload.len(),
            })?;
        if end > payload.len() {
            return Err(NetworkError::TruncatedPayload {
                expected: end,
                got: payload.len(),
            });
        }
        let mut out = Vec::with_capacity(len);
        for i in 0..len {
            let at = entry.offset + 4 * i;
            let raw: [u8; 4] = payload[at..at + 4].try_into().unwrap();
            let v = f32::from_le_bytes(raw) as f64;
            if !v.is_finite() {
                return Err(NetworkError::CorruptManifest(format!(
                    "non-finite value in tensor {:?}",
                    entry.name
                )));
            }
            out.push(v);
        }
        Ok(out)
    };

    let base_tensors = tensor_directory(&manifest.config).len();
    let mut flat: Vec<f64> = Vec::with_capacity(param_count);
    for entry in manifest.tensors.iter().take(base_tensors) {
        flat.extend(read_tensor(entry)?);
    }
    if flat.len() != param_count {
        return Err(NetworkError::CorruptManifest(format!(
            "parameter payload holds {} values, architecture requires {param_count}",
            flat.len()
        )));
    }
    let mut it = flat.into_iter();
    weights.visit_params_mut(|v| *v = it.next().unwrap());

    let train_state = match manifest.train_state {
        None => None,
        Some(meta) => {
            let m_entry = manifest
                .tensors
                .iter()
                .find(|t| t.name == "adam.m")
                .ok_or_else(|| NetworkError::CorruptManifest("missing adam.m".into()))?;
            let v_entry = manifest
                .tensors
                .iter()
                .find(|t| t.name == "adam.v")
                .ok_or_else(|| NetworkError::CorruptManifest("missing adam.v".into()))?;
            Some(TrainStateBlob {
                iteration: meta.iteration,
                adam_m: read_tensor(m_entry)?,
                adam_v: read_tensor(v_entry)?,
            })
        }
    };

    Ok((weights, train_state))
}
