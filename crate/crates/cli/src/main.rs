//! Command-line toolkit for rotation-equivariant surface descriptors.
//!
//! Subcommands cover the whole pipeline: `synth` builds a synthetic
//! fragment-pair benchmark, `train` fits the encoder/decoder on local
//! neighborhoods, `describe` encodes keypoints of a cloud, `evaluate` and
//! `rotate-benchmark` score registration recall, `check` sweeps rotation
//! angles to quantify orientation quality, and `inspect-checkpoint` prints
//! a checkpoint summary.
//!
//! Every subcommand is deterministic given its flags, its `--seed`, and its
//! input files when run with `--threads 1`; a JSON run manifest is written
//! next to each output. Validation failures exit with code 2, runtime
//! failures with code 1, both as one JSON object on stderr.

mod cmd_check;
mod cmd_describe;
mod cmd_evaluate;
mod cmd_inspect;
mod cmd_synth;
mod cmd_train;
mod descfile;
mod errors;
mod manifest;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use errors::CliError;

#[derive(Parser)]
#[command(
    name = "equidesc",
    version,
    about = "Rotation-equivariant local 3D surface descriptors",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic fragment-pair benchmark scene
    Synth(cmd_synth::SynthArgs),
    /// Train the descriptor network on neighborhoods from point clouds
    Train(cmd_train::TrainArgs),
    /// Compute descriptors for keypoints of one cloud
    Describe(cmd_describe::DescribeArgs),
    /// Score registration recall on a benchmark scene
    Evaluate(cmd_evaluate::EvaluateArgs),
    /// Evaluate with every fragment randomly rotated first
    RotateBenchmark(cmd_evaluate::EvaluateArgs),
    /// Sweep rotation angles and report oriented vs unoriented drift
    Check(cmd_check::CheckArgs),
    /// Print a checkpoint summary as JSON
    InspectCheckpoint(cmd_inspect::InspectArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let err = CliError::Validation(e.to_string());
            err.emit();
            std::process::exit(err.exit_code());
        }
    };
    let result = match cli.command {
        Command::Synth(args) => cmd_synth::run(args),
        Command::Train(args) => cmd_train::run(args),
        Command::Describe(args) => cmd_describe::run(args),
        Command::Evaluate(args) => cmd_evaluate::run(args, false),
        Command::RotateBenchmark(args) => cmd_evaluate::run(args, true),
        Command::Check(args) => cmd_check::run(args),
        Command::InspectCheckpoint(args) => cmd_inspect::run(args),
    };
    if let Err(e) = result {
        e.emit();
        std::process::exit(e.exit_code());
    }
}
