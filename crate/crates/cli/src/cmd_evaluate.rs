//! `evaluate` / `rotate-benchmark`: score registration recall on a scene.
//!
//! The scene directory must hold a `scene.json` index (as written by
//! `synth`) naming each pair's source cloud, target cloud, and
//! ground-truth pose. Descriptors come from one of two sources:
//!
//! * `--checkpoint` (with `--mode`): each fragment is voxel-downsampled,
//!   keypoints are chosen (all points, or a seeded sample when the cloud
//!   exceeds `--keypoints`), and descriptors are computed in-process;
//! * `--desc-dir`: precomputed `pair_NNN_source.desc` /
//!   `pair_NNN_target.desc` files from `describe`, whose rows carry both
//!   keypoints and descriptors.
//!
//! `--rotate` (always on for the `rotate-benchmark` alias) first applies an
//! independent random rotation to every fragment, mapping the ground truth
//! accordingly — descriptor quality must survive re-posing. Outputs:
//! `metrics.json`, `per_pair.csv`, `sweep.csv` (recall across the inlier
//! threshold grid), and `manifest.json`.

use crate::cmd_describe::{describe_all, ModeArg};
use crate::descfile::read_descriptor_file;
use crate::errors::{runtime, runtime_at, validation, CliError};
use crate::manifest::RunManifest;
use clap::Args;
use equidesc::bench::{
    load_cloud, load_pose, make_rotated_benchmark, registration_recall, sample_keypoints,
    voxel_downsample, DescribedPair, EvalConfig, FragmentPair, RecallReport,
};
use equidesc::geom::PointCloud;
use equidesc::network::{load_checkpoint, ModelWeights};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Scene directory holding scene.json and the files it names
    #[arg(long)]
    pub scene: PathBuf,
    /// Output directory (created if missing)
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Checkpoint for in-process description
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Orientation mode for in-process description
    #[arg(long, value_enum, default_value_t = ModeArg::Lrf)]
    pub mode: ModeArg,
    /// Directory of precomputed descriptor files instead of a checkpoint
    #[arg(long)]
    pub desc_dir: Option<PathBuf>,
    /// Correspondence inlier distance, meters
    #[arg(long, default_value_t = 0.10)]
    pub tau1: f64,
    /// Inlier-fraction threshold for a registered pair
    #[arg(long, default_value_t = 0.05)]
    pub tau2: f64,
    /// Skip pairs below this ground-truth overlap
    #[arg(long, default_value_t = 0.30)]
    pub min_overlap: f64,
    /// Keypoint budget per fragment (whole cloud when it is smaller)
    #[arg(long, default_value_t = 5000)]
    pub keypoints: usize,
    /// Voxel edge length for downsampling, meters
    #[arg(long, default_value_t = 0.02)]
    pub voxel: f64,
    /// Neighborhood size for normal estimation
    #[arg(long, default_value_t = 17)]
    pub normal_k: usize,
    /// Randomly rotate every fragment before evaluating
    #[arg(long)]
    pub rotate: bool,
    /// Seed for all randomness of this command
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-keypoint encoding
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Deserialize)]
struct SceneEntry {
    source: String,
    target: String,
    pose: String,
    overlap: f64,
}

#[derive(Debug, Deserialize)]
struct SceneIndex {
    pairs: Vec<SceneEntry>,
}

fn load_scene(dir: &Path) -> Result<(Vec<FragmentPair>, Vec<PathBuf>), CliError> {
    let index_path = dir.join("scene.json");
    let text =
        std::fs::read_to_string(&index_path).map_err(|e| runtime_at(index_path.display(), e))?;
    let index: SceneIndex =
        serde_json::from_str(&text).map_err(|e| runtime_at(index_path.display(), e))?;
    let mut pairs = Vec::with_capacity(index.pairs.len());
    let mut inputs = vec![index_path];
    for entry in &index.pairs {
        let source_path = dir.join(&entry.source);
        let target_path = dir.join(&entry.target);
        let pose_path = dir.join(&entry.pose);
        let source = load_cloud(&source_path).map_err(runtime)?;
        let target = load_cloud(&target_path).map_err(runtime)?;
        let pose = load_pose(&pose_path).map_err(runtime)?;
        let pair =
            FragmentPair::new(source, target, pose, entry.overlap).map_err(runtime)?;
        pairs.push(pair);
        inputs.extend([source_path, target_path, pose_path]);
    }
    Ok((pairs, inputs))
}

/// Keypoints of one fragment: every downsampled point when the budget
/// covers the cloud, otherwise a seeded uniform sample. The seed substream
/// is derived from (pair index, side) so pair order and threading are
/// irrelevant.
fn select_keypoints(
    cloud: &PointCloud,
    budget: usize,
    seed: u64,
    pair_idx: usize,
    side: usize,
) -> Result<Vec<Vector3<f64>>, CliError> {
    if budget >= cloud.points.len() {
        return Ok(cloud.points.clone());
    }
    let stream = seed.wrapping_add(1000 + (2 * pair_idx + side) as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    Ok(sample_keypoints(cloud, budget, &mut rng)
        .map_err(runtime)?
        .into_iter()
        .map(|i| cloud.points[i])
        .collect())
}

/// Downsample, pick keypoints, and describe one fragment.
fn describe_fragment(
    cloud: &PointCloud,
    weights: &ModelWeights,
    args: &EvaluateArgs,
    pair_idx: usize,
    side: usize,
) -> Result<(Vec<Vector3<f64>>, Vec<equidesc::network::Descriptor>), CliError> {
    let down = voxel_downsample(cloud, args.voxel).map_err(runtime)?;
    let keypoints = select_keypoints(&down, args.keypoints, args.seed, pair_idx, side)?;
    let (kps, descs, warnings) =
        describe_all(&down, &keypoints, weights, args.mode, args.threads)?;
    if !warnings.is_empty() {
        let side_name = if side == 0 { "source" } else { "target" };
        let warning = serde_json::json!({
            "warning": {
                "pair": pair_idx,
                "fragment": side_name,
                "keypoints_skipped": warnings.len(),
            }
        });
        eprintln!("{warning}");
    }
    Ok((kps, descs))
}

fn write_outputs(
    out_dir: &Path,
    report: &RecallReport,
) -> Result<(), CliError> {
    let metrics_path = out_dir.join("metrics.json");
    let mut text = serde_json::to_string_pretty(report).map_err(runtime)?;
    text.push('\n');
    std::fs::write(&metrics_path, text).map_err(|e| runtime_at(metrics_path.display(), e))?;

    let mut per_pair = String::from("pair,evaluated,inlier_ratio,registered,correspondences\n");
    for (i, outcome) in report.per_pair.iter().enumerate() {
        writeln!(
            per_pair,
            "{},{},{},{},{}",
            i, outcome.evaluated, outcome.inlier_ratio, outcome.registered, outcome.correspondences
        )
        .expect("string write");
    }
    let per_pair_path = out_dir.join("per_pair.csv");
    std::fs::write(&per_pair_path, per_pair)
        .map_err(|e| runtime_at(per_pair_path.display(), e))?;

    let mut sweep = String::from("tau2,recall\n");
    for (tau2, recall) in &report.curve {
        writeln!(sweep, "{tau2},{recall}").expect("string write");
    }
    let sweep_path = out_dir.join("sweep.csv");
    std::fs::write(&sweep_path, sweep).map_err(|e| runtime_at(sweep_path.display(), e))
}

pub fn run(args: EvaluateArgs, forced_rotate: bool) -> Result<(), CliError> {
    let started = Instant::now();
    let command = if forced_rotate { "rotate-benchmark" } else { "evaluate" };
    let rotate = args.rotate || forced_rotate;

    if args.checkpoint.is_some() == args.desc_dir.is_some() {
        return Err(validation(
            "provide exactly one descriptor source: --checkpoint FILE or --desc-dir DIR",
        ));
    }
    if args.desc_dir.is_some() && rotate {
        return Err(validation(
            "--desc-dir cannot be combined with rotation: precomputed descriptors \
             were built on the unrotated fragments",
        ));
    }
    if args.threads == 0 {
        return Err(validation("--threads must be at least 1"));
    }

    let weights = match &args.checkpoint {
        Some(path) => {
            let (weights, _) =
                load_checkpoint(path).map_err(|e| runtime_at(path.display(), e))?;
            Some(weights)
        }
        None => None,
    };
    let eval_cfg = EvalConfig {
        tau1: args.tau1,
        tau2: args.tau2,
        min_overlap: args.min_overlap,
        n_keypoints: args.keypoints,
        voxel: args.voxel,
        normal_k: args.normal_k,
        support_radius: weights
            .as_ref()
            .map(|w| w.config.support_radius)
            .unwrap_or(EvalConfig::default().support_radius),
    };
    eval_cfg.validate().map_err(validation)?;

    let (mut pairs, mut input_paths) = load_scene(&args.scene)?;
    if rotate {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        pairs = make_rotated_benchmark(&pairs, &mut rng);
    }

    let mut described = Vec::with_capacity(pairs.len());
    match (&weights, &args.desc_dir) {
        (Some(weights), None) => {
            for (i, pair) in pairs.iter().enumerate() {
                let (kps_s, descs_s) = describe_fragment(&pair.source, weights, &args, i, 0)?;
                let (kps_t, descs_t) = describe_fragment(&pair.target, weights, &args, i, 1)?;
                described.push(DescribedPair {
                    keypoints_source: kps_s,
                    keypoints_target: kps_t,
                    desc_source: descs_s,
                    desc_target: descs_t,
                    gt_pose: pair.gt_pose,
                    overlap: pair.overlap,
                });
            }
        }
        (None, Some(desc_dir)) => {
            for (i, pair) in pairs.iter().enumerate() {
                let source_path = desc_dir.join(format!("pair_{i:03}_source.desc"));
                let target_path = desc_dir.join(format!("pair_{i:03}_target.desc"));
                let source = read_descriptor_file(&source_path)?;
                let target = read_descriptor_file(&target_path)?;
                if source.mode != target.mode {
                    return Err(runtime(format!(
                        "pair {i}: descriptor modes disagree ({} vs {}); \
                         both fragments must be described the same way",
                        source.mode, target.mode
                    )));
                }
                described.push(DescribedPair {
                    keypoints_source: source.keypoints,
                    keypoints_target: target.keypoints,
                    desc_source: source.descriptors,
                    desc_target: target.descriptors,
                    gt_pose: pair.gt_pose,
                    overlap: pair.overlap,
                });
                input_paths.extend([source_path, target_path]);
            }
        }
        _ => unreachable!("validated above"),
    }

    let report = registration_recall(&described, &eval_cfg).map_err(runtime)?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| runtime_at(args.out_dir.display(), e))?;
    write_outputs(&args.out_dir, &report)?;

    let config = serde_json::to_value(&args).map_err(runtime)?;
    let mut manifest = RunManifest::new(command, config, args.seed);
    for path in &input_paths {
        manifest.add_input(path)?;
    }
    if let Some(path) = &args.checkpoint {
        manifest.add_input(path)?;
    }
    manifest.write(&args.out_dir.join("manifest.json"), started)?;

    let summary = serde_json::json!({
        "command": command,
        "recall": report.recall,
        "evaluated_pairs": report.evaluated_pairs,
    });
    crate::errors::print_line(&summary);
    Ok(())
}
