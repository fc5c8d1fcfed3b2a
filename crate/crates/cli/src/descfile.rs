//! Descriptor file format.
//!
//! A descriptor file is a one-line JSON header followed by a flat
//! little-endian `f32` payload:
//!
//! ```text
//! {"count":N,"dim":D,"mode":"lrf"}\n
//! N rows of (3 + D) little-endian f32 values
//! ```
//!
//! Each row carries the keypoint coordinates (x, y, z) followed by its
//! D-dimensional descriptor, so a single file holds everything a matching
//! run needs. `mode` records how the descriptors were oriented: `raw`
//! (none), `self` (feature-map self-orientation), or `lrf` (geometric
//! reference frame).

use crate::errors::{runtime_at, CliError};
use equidesc::network::Descriptor;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const MODES: [&str; 3] = ["raw", "self", "lrf"];

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    count: usize,
    dim: usize,
    mode: String,
}

#[derive(Debug)]
pub struct DescriptorFile {
    pub mode: String,
    pub keypoints: Vec<Vector3<f64>>,
    pub descriptors: Vec<Descriptor>,
}

/// Writes keypoints and their descriptors to `path`.
///
/// All descriptors must share one length; values round through `f32`.
pub fn write_descriptor_file(
    path: &Path,
    mode: &str,
    keypoints: &[Vector3<f64>],
    descriptors: &[Descriptor],
) -> Result<(), CliError> {
    assert_eq!(keypoints.len(), descriptors.len());
    assert!(MODES.contains(&mode), "unknown descriptor mode {mode}");
    let dim = descriptors.first().map(|d| d.values.len()).unwrap_or(0);
    let header = Header {
        count: descriptors.len(),
        dim,
        mode: mode.to_string(),
    };
    let mut bytes = serde_json::to_vec(&header).map_err(|e| runtime_at(path.display(), e))?;
    bytes.push(b'\n');
    bytes.reserve(descriptors.len() * (3 + dim) * 4);
    for (kp, desc) in keypoints.iter().zip(descriptors) {
        assert_eq!(desc.values.len(), dim, "descriptor rows must share one length");
        for coord in [kp.x, kp.y, kp.z] {
            bytes.extend_from_slice(&(coord as f32).to_le_bytes());
        }
        for &v in &desc.values {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| runtime_at(path.display(), e))?;
    file.write_all(&bytes).map_err(|e| runtime_at(path.display(), e))
}

/// Loads a descriptor file, checking the header against the payload size.
pub fn read_descriptor_file(path: &Path) -> Result<DescriptorFile, CliError> {
    let bytes = std::fs::read(path).map_err(|e| runtime_at(path.display(), e))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| runtime_at(path.display(), "missing header line"))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| runtime_at(path.display(), format!("bad header: {e}")))?;
    if !MODES.contains(&header.mode.as_str()) {
        return Err(runtime_at(
            path.display(),
            format!("unknown descriptor mode {:?}", header.mode),
        ));
    }
    // The descriptor is a flattened rotation-group map, so its length must
    // be a perfect (2b)^3; recover b to rebuild typed descriptors.
    let bandwidth = if header.dim == 0 {
        0
    } else {
        let b = ((header.dim as f64).cbrt() / 2.0).round() as usize;
        if b == 0 || (2 * b).pow(3) != header.dim {
            return Err(runtime_at(
                path.display(),
                format!("descriptor length {} is not a cube of an even number", header.dim),
            ));
        }
        b
    };
    let payload = &bytes[newline + 1..];
    let row = (3 + header.dim) * 4;
    if payload.len() != header.count * row {
        return Err(runtime_at(
            path.display(),
            format!(
                "payload holds {} bytes but header declares {} rows of {} bytes",
                payload.len(),
                header.count,
                row
            ),
        ));
    }
    let mut keypoints = Vec::with_capacity(header.count);
    let mut descriptors = Vec::with_capacity(header.count);
    for chunk in payload.chunks_exact(row) {
        let mut floats = chunk
            .chunks_exact(4)
            .map(|w| f32::from_le_bytes([w[0], w[1], w[2], w[3]]) as f64);
        let x = floats.next().unwrap();
        let y = floats.next().unwrap();
        let z = floats.next().unwrap();
        keypoints.push(Vector3::new(x, y, z));
        descriptors.push(Descriptor {
            bandwidth,
            values: floats.collect(),
        });
    }
    Ok(DescriptorFile {
        mode: header.mode,
        keypoints,
        descriptors,
    })
}
