//! `describe`: encode keypoints of a cloud into descriptors.
//!
//! Keypoints come either from a text file of coordinates (`--keypoints`,
//! one `x y z` row per point) or by seeded uniform sampling from the cloud
//! itself (`--sample-n`). Every keypoint must lie within the cloud's
//! bounding box inflated by the support radius; keypoints whose support is
//! degenerate (too few points, or no stable reference frame in `lrf` mode)
//! are skipped with a JSON warning on stderr rather than failing the run.
//!
//! The output is a descriptor file (JSON header plus little-endian `f32`
//! rows of keypoint coordinates and descriptor values) and a run manifest.

use crate::descfile::write_descriptor_file;
use crate::errors::{runtime, runtime_at, validation, CliError};
use crate::manifest::{manifest_beside, RunManifest};
use clap::Args;
use equidesc::bench::{load_cloud, sample_keypoints};
use equidesc::geom::PointCloud;
use equidesc::network::{load_checkpoint, Descriptor, ModelWeights};
use equidesc::orient::{
    invariant_descriptor, raw_descriptor, OrientConfig, OrientError, OrientMode,
};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
pub enum ModeArg {
    /// No canonicalization; descriptors co-rotate with the cloud
    #[value(name = "raw")]
    #[serde(rename = "raw")]
    Raw,
    /// Self-orientation from the descriptor's own dominant response
    #[value(name = "self")]
    #[serde(rename = "self")]
    SelfOrient,
    /// Geometric local reference frame
    #[value(name = "lrf")]
    #[serde(rename = "lrf")]
    Lrf,
}

impl ModeArg {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeArg::Raw => "raw",
            ModeArg::SelfOrient => "self",
            ModeArg::Lrf => "lrf",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DescribeArgs {
    /// Input cloud (.ply / .xyz)
    #[arg(long)]
    pub cloud: PathBuf,
    /// Trained (or at least saved) network checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Descriptor file output path
    #[arg(long)]
    pub out: PathBuf,
    /// Orientation mode stamped into the output file
    #[arg(long, value_enum, default_value_t = ModeArg::Lrf)]
    pub mode: ModeArg,
    /// Text file of keypoint coordinates, one "x y z" row per keypoint
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
    /// Sample this many keypoints uniformly from the cloud instead
    #[arg(long)]
    pub sample_n: Option<usize>,
    /// Seed for all randomness of this command
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-keypoint encoding
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

/// Encodes one keypoint in the requested mode.
pub fn describe_keypoint(
    cloud: &PointCloud,
    center: &Vector3<f64>,
    weights: &ModelWeights,
    mode: ModeArg,
) -> Result<Descriptor, OrientError> {
    match mode {
        ModeArg::Raw => raw_descriptor(cloud, center, weights),
        ModeArg::SelfOrient => {
            // The canonical peak-cluster size, clipped for coarse maps.
            let cfg = OrientConfig {
                top_k: OrientConfig::default().top_k.min(weights.config.descriptor_len()),
            };
            invariant_descriptor(cloud, center, weights, OrientMode::SelfOrient, &cfg)
        }
        ModeArg::Lrf => invariant_descriptor(
            cloud,
            center,
            weights,
            OrientMode::Lrf,
            &OrientConfig::default(),
        ),
    }
}

/// True for failures that disqualify one keypoint rather than the run.
fn is_skippable(err: &OrientError) -> bool {
    matches!(
        err,
        OrientError::TooFewPoints { .. }
            | OrientError::AmbiguousNormal(_)
            | OrientError::AmbiguousTangent(_)
    )
}

/// Encodes all keypoints on a thread pool, keeping input order. Skippable
/// per-keypoint failures come back as warnings `(index, message)`.
#[allow(clippy::type_complexity)]
pub fn describe_all(
    cloud: &PointCloud,
    keypoints: &[Vector3<f64>],
    weights: &ModelWeights,
    mode: ModeArg,
    threads: usize,
) -> Result<(Vec<Vector3<f64>>, Vec<Descriptor>, Vec<(usize, String)>), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(runtime)?;
    let results: Vec<Result<Descriptor, OrientError>> = pool.install(|| {
        keypoints
            .par_iter()
            .map(|kp| describe_keypoint(cloud, kp, weights, mode))
            .collect()
    });
    let mut kept_kps = Vec::new();
    let mut kept_descs = Vec::new();
    let mut warnings = Vec::new();
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok(desc) => {
                kept_kps.push(keypoints[i]);
                kept_descs.push(desc);
            }
            Err(e) if is_skippable(&e) => warnings.push((i, e.to_string())),
            Err(e) => return Err(runtime(format!("keypoint {i}: {e}"))),
        }
    }
    Ok((kept_kps, kept_descs, warnings))
}

/// Errors unless every keypoint lies inside the cloud's axis-aligned
/// bounding box inflated by `margin` on each side.
pub fn check_keypoint_bounds(
    cloud: &PointCloud,
    keypoints: &[Vector3<f64>],
    margin: f64,
) -> Result<(), CliError> {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in &cloud.points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    for (i, kp) in keypoints.iter().enumerate() {
        for axis in 0..3 {
            if kp[axis] < lo[axis] - margin || kp[axis] > hi[axis] + margin {
                return Err(runtime(format!(
                    "keypoint {i} at ({}, {}, {}) lies outside the cloud bounds",
                    kp.x, kp.y, kp.z
                )));
            }
        }
    }
    Ok(())
}

pub fn run(args: DescribeArgs) -> Result<(), CliError> {
    let started = Instant::now();
    if args.keypoints.is_some() == args.sample_n.is_some() {
        return Err(validation(
            "provide exactly one keypoint source: --keypoints FILE or --sample-n N",
        ));
    }
    if args.threads == 0 {
        return Err(validation("--threads must be at least 1"));
    }

    let cloud = load_cloud(&args.cloud).map_err(runtime)?;
    let (weights, _) =
        load_checkpoint(&args.checkpoint).map_err(|e| runtime_at(args.checkpoint.display(), e))?;

    let keypoints: Vec<Vector3<f64>> = match (&args.keypoints, args.sample_n) {
        (Some(path), None) => load_cloud(path).map_err(runtime)?.points,
        (None, Some(n)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            sample_keypoints(&cloud, n, &mut rng)
                .map_err(runtime)?
                .into_iter()
                .map(|i| cloud.points[i])
                .collect()
        }
        _ => unreachable!("validated above"),
    };
    check_keypoint_bounds(&cloud, &keypoints, weights.config.support_radius)?;

    let (kept_kps, kept_descs, warnings) =
        describe_all(&cloud, &keypoints, &weights, args.mode, args.threads)?;
    for (index, message) in &warnings {
        let warning = serde_json::json!({
            "warning": { "keypoint": index, "skipped": message }
        });
        eprintln!("{warning}");
    }

    write_descriptor_file(&args.out, args.mode.as_str(), &kept_kps, &kept_descs)?;

    let config = serde_json::to_value(&args).map_err(runtime)?;
    let mut manifest = RunManifest::new("describe", config, args.seed);
    manifest.add_input(&args.cloud)?;
    manifest.add_input(&args.checkpoint)?;
    if let Some(path) = &args.keypoints {
        manifest.add_input(path)?;
    }
    manifest.write(&manifest_beside(&args.out), started)
}
