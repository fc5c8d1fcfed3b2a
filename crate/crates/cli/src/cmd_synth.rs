//! `synth`: generate a synthetic fragment-pair benchmark scene.
//!
//! Writes, into `--out-dir`:
//! * `pair_NNN_source.ply`, `pair_NNN_target.ply` — binary little-endian
//!   point clouds, one pair per index;
//! * `pair_NNN_pose.txt` — the 4x4 ground-truth pose mapping target
//!   coordinates into source coordinates;
//! * `scene.json` — the scene index: generation parameters plus per-pair
//!   file names and measured overlaps;
//! * `manifest.json` — the run manifest.

use crate::errors::{runtime, runtime_at, validation, CliError};
use crate::manifest::RunManifest;
use clap::Args;
use equidesc::bench::{generate_synthetic_scene, save_cloud, save_pose, CloudFormat, SceneSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Number of fragment pairs
    #[arg(long, default_value_t = 4)]
    pub pairs: usize,
    /// Points sampled per fragment
    #[arg(long, default_value_t = 2000)]
    pub points: usize,
    /// Standard deviation of per-point surface noise, meters
    #[arg(long, default_value_t = 0.005)]
    pub noise: f64,
    /// Requested overlap fraction between the fragments of a pair, in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    /// Seed for all randomness of this command
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing)
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct SceneEntry {
    source: String,
    target: String,
    pose: String,
    overlap: f64,
}

#[derive(Serialize)]
struct SceneIndex {
    spec: SceneSpec,
    pairs: Vec<SceneEntry>,
}

pub fn run(args: SynthArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let spec = SceneSpec {
        pairs: args.pairs,
        points_per_fragment: args.points,
        noise_sigma: args.noise,
        overlap_target: args.overlap,
    };
    spec.validate().map_err(validation)?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| runtime_at(args.out_dir.display(), e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let pairs = generate_synthetic_scene(&spec, &mut rng).map_err(runtime)?;

    let mut entries = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        let source = format!("pair_{i:03}_source.ply");
        let target = format!("pair_{i:03}_target.ply");
        let pose = format!("pair_{i:03}_pose.txt");
        save_cloud(
            args.out_dir.join(&source),
            &pair.source,
            CloudFormat::PlyBinaryLittleEndian,
        )
        .map_err(runtime)?;
        save_cloud(
            args.out_dir.join(&target),
            &pair.target,
            CloudFormat::PlyBinaryLittleEndian,
        )
        .map_err(runtime)?;
        save_pose(args.out_dir.join(&pose), &pair.gt_pose).map_err(runtime)?;
        entries.push(SceneEntry {
            source,
            target,
            pose,
            overlap: pair.overlap,
        });
    }

    let index = SceneIndex {
        spec,
        pairs: entries,
    };
    let index_path = args.out_dir.join("scene.json");
    let mut text = serde_json::to_string_pretty(&index).map_err(runtime)?;
    text.push('\n');
    std::fs::write(&index_path, text).map_err(|e| runtime_at(index_path.display(), e))?;

    let config = serde_json::to_value(&args).map_err(runtime)?;
    let manifest = RunManifest::new("synth", config, args.seed);
    manifest.write(&args.out_dir.join("manifest.json"), started)
}
