//! `inspect-checkpoint`: print a checkpoint summary as JSON on stdout.

use crate::errors::{runtime, runtime_at, CliError};
use clap::Args;
use equidesc::network::{load_checkpoint, FORMAT_TAG};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Args, Serialize)]
pub struct InspectArgs {
    /// Checkpoint file to inspect
    #[arg(long)]
    pub checkpoint: PathBuf,
}

pub fn run(args: InspectArgs) -> Result<(), CliError> {
    let (weights, train_state) =
        load_checkpoint(&args.checkpoint).map_err(|e| runtime_at(args.checkpoint.display(), e))?;
    let file_size = std::fs::metadata(&args.checkpoint)
        .map_err(|e| runtime_at(args.checkpoint.display(), e))?
        .len();
    let summary = serde_json::json!({
        "format": FORMAT_TAG,
        "file_size_bytes": file_size,
        "param_count": weights.param_count(),
        "trained_iterations": train_state.map(|s| s.iteration),
        "descriptor_len": weights.config.descriptor_len(),
        "config": serde_json::to_value(&weights.config).map_err(runtime)?,
    });
    crate::errors::print_line(serde_json::to_string_pretty(&summary).map_err(runtime)?);
    Ok(())
}
