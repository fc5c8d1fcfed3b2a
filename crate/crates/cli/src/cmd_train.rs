//! `train`: fit the encoder/decoder on neighborhoods drawn from clouds.
//!
//! Training data is a directory of `.ply` / `.xyz` clouds. The command
//! harvests `--patches` keypoint neighborhoods (uniformly random cloud,
//! uniformly random center, rejecting centers with fewer than the minimum
//! support points), then runs the reconstruction-loss training loop and
//! writes a checkpoint, an optional loss CSV, and a run manifest.
//!
//! Defaults mirror the published hyperparameters (`--lr 0.001`,
//! `--batch 32`, `--decay-every 4000`, `--epochs 14`, full-scale network).
//! `--preset desk` switches to the desk-scale network capped at 2000
//! iterations; `--preset tiny` is a smoke-test scale. `--resume` continues
//! a previous run from its checkpoint, including the optimizer state and
//! the iteration count.

use crate::errors::{runtime, runtime_at, validation, CliError};
use crate::manifest::{manifest_beside, RunManifest};
use clap::Args;
use equidesc::bench::load_cloud;
use equidesc::geom::PointCloud;
use equidesc::network::{init_weights, load_checkpoint, save_checkpoint, NetworkConfig};
use equidesc::orient::MIN_SUPPORT_POINTS;
use equidesc::train::{
    extract_neighborhoods, train, write_loss_csv, AdamState, Neighborhood, TrainConfig,
};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Desk-scale network (bandwidth 8), capped at 2000 iterations
    Desk,
    /// Miniature network for smoke tests
    Tiny,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Directory of training clouds (.ply / .xyz)
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint output path
    #[arg(long)]
    pub out: PathBuf,
    /// Optional loss-history CSV output path
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    /// Network scale preset; omitted = full published scale
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Initial learning rate
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Minibatch size
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Halve the learning rate after this many iterations
    #[arg(long, default_value_t = 4000)]
    pub decay_every: u64,
    /// Passes over the harvested patch set
    #[arg(long, default_value_t = 14)]
    pub epochs: usize,
    /// Hard cap on optimizer iterations (overrides the preset's cap)
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Neighborhood patches to harvest from the data
    #[arg(long, default_value_t = 200)]
    pub patches: usize,
    /// Largest per-sample point count; larger supports are subsampled
    #[arg(long, default_value_t = 1024)]
    pub max_points: usize,
    /// Disable random-rotation augmentation
    #[arg(long)]
    pub no_augment: bool,
    /// Seed for all randomness of this command
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Resume from this checkpoint (architecture and optimizer state
    /// come from the file; incompatible with --preset)
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

/// Clouds of the data directory in sorted file-name order.
fn load_training_clouds(dir: &Path) -> Result<Vec<(PathBuf, PointCloud)>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| runtime_at(dir.display(), e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("ply") | Some("xyz")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(runtime_at(
            dir.display(),
            "no training clouds found (expected .ply or .xyz files)",
        ));
    }
    paths
        .into_iter()
        .map(|p| {
            let cloud = load_cloud(&p).map_err(runtime)?;
            Ok((p, cloud))
        })
        .collect()
}

/// Draws `patches` neighborhoods: uniform cloud, uniform center point,
/// rejecting centers with insufficient support, within a bounded number of
/// attempts.
fn harvest_patches<R: Rng + ?Sized>(
    clouds: &[(PathBuf, PointCloud)],
    patches: usize,
    radius: f64,
    rng: &mut R,
) -> Result<Vec<Neighborhood>, CliError> {
    let mut samples = Vec::with_capacity(patches);
    let budget = patches.saturating_mul(50);
    let mut attempts = 0usize;
    while samples.len() < patches {
        if attempts >= budget {
            return Err(runtime(format!(
                "could only harvest {} of {} patches with >= {} support points within {} attempts",
                samples.len(),
                patches,
                MIN_SUPPORT_POINTS,
                budget
            )));
        }
        attempts += 1;
        let (_, cloud) = &clouds[rng.random_range(0..clouds.len())];
        if cloud.points.is_empty() {
            continue;
        }
        let center = cloud.points[rng.random_range(0..cloud.points.len())];
        let nb = extract_neighborhoods(cloud, &[center], radius);
        if nb[0].offsets.len() >= MIN_SUPPORT_POINTS {
            samples.push(nb.into_iter().next().unwrap());
        }
    }
    Ok(samples)
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let started = Instant::now();
    if args.resume.is_some() && args.preset.is_some() {
        return Err(validation(
            "--resume and --preset are mutually exclusive: a resumed run \
             keeps the architecture stored in its checkpoint",
        ));
    }

    // Preset iteration caps apply unless --iterations overrides them.
    let (arch, preset_iterations) = match args.preset {
        Some(Preset::Desk) => (NetworkConfig::desk_scale(), Some(2000)),
        Some(Preset::Tiny) => (NetworkConfig::tiny(), None),
        None => (NetworkConfig::paper_scale(), None),
    };
    let cfg = TrainConfig {
        batch_size: args.batch,
        learning_rate: args.lr,
        decay_interval: args.decay_every,
        decay_factor: 0.5,
        epochs: args.epochs,
        max_iterations: args.iterations.or(preset_iterations),
        max_points: args.max_points,
        augment: !args.no_augment,
        seed: args.seed,
    };
    cfg.validate().map_err(validation)?;

    let clouds = load_training_clouds(&args.data)?;

    let (mut weights, resume_state) = match &args.resume {
        Some(path) => {
            let (weights, blob) = load_checkpoint(path).map_err(|e| runtime_at(path.display(), e))?;
            let blob = blob.ok_or_else(|| {
                runtime_at(path.display(), "checkpoint carries no optimizer state; cannot resume")
            })?;
            let state = AdamState::from_blob(&blob);
            (weights, Some(state))
        }
        None => {
            let mut wrng = ChaCha8Rng::seed_from_u64(args.seed);
            let weights = init_weights(&arch, &mut wrng).map_err(runtime)?;
            (weights, None)
        }
    };

    let mut prng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(1));
    let samples = harvest_patches(
        &clouds,
        args.patches,
        weights.config.support_radius,
        &mut prng,
    )?;

    let outcome = train(&mut weights, &samples, &cfg, resume_state).map_err(runtime)?;

    save_checkpoint(&args.out, &weights, Some(&outcome.state.to_blob()))
        .map_err(|e| runtime_at(args.out.display(), e))?;
    if let Some(csv_path) = &args.loss_csv {
        let mut file =
            std::fs::File::create(csv_path).map_err(|e| runtime_at(csv_path.display(), e))?;
        write_loss_csv(&outcome.history, &mut file)
            .map_err(|e| runtime_at(csv_path.display(), e))?;
    }

    let config = serde_json::to_value(&args).map_err(runtime)?;
    let mut manifest = RunManifest::new("train", config, args.seed);
    for (path, _) in &clouds {
        manifest.add_input(path)?;
    }
    if let Some(path) = &args.resume {
        manifest.add_input(path)?;
    }
    manifest.write(&manifest_beside(&args.out), started)
}
