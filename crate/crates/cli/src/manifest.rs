//! Run manifests: a JSON record written next to every command's outputs.
//!
//! The manifest captures everything needed to replay the run — the
//! subcommand, the fully resolved flag values, the seed, SHA-256 digests of
//! each input file, and the tool version. Re-running the recorded command
//! with `--threads 1` reproduces the sibling output files byte for byte;
//! the manifest itself additionally records the wall-clock duration, which
//! naturally varies between runs.

use crate::errors::{runtime_at, CliError};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved flag values of the invocation.
    pub config: serde_json::Value,
    pub seed: u64,
    /// SHA-256 hex digest of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            config,
            seed,
            inputs: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: 0.0,
        }
    }

    /// Digests `path` and records it under its display name.
    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| runtime_at(path.display(), e))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let digest = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Stamps the elapsed time and writes the manifest to `path`.
    pub fn write(mut self, path: &Path, started: Instant) -> Result<(), CliError> {
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        let mut text =
            serde_json::to_string_pretty(&self).map_err(|e| runtime_at(path.display(), e))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| runtime_at(path.display(), e))
    }
}

/// Manifest path for a command whose primary output is the file `out`:
/// the same name with `.manifest.json` appended.
pub fn manifest_beside(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
