//! `check`: sweep rotation angles and measure orientation quality.
//!
//! For each of `--axes` random rotation axes, a fresh synthetic surface
//! patch is encoded once in place (`d0`) and then re-encoded after rotating
//! the patch by 12 angles from 0 to pi about that axis. Two relative
//! distances to `d0` are recorded per angle:
//!
//! * *oriented*: the rotated patch's descriptor re-oriented by the known
//!   inverse rotation — ideally near zero at every angle;
//! * *unoriented*: the rotated patch's descriptor as-is — expected to grow
//!   with the angle.
//!
//! The command writes a CSV of per-angle medians across axes and passes
//! when the oriented median stays at or below 0.1 everywhere while the
//! unoriented median increases with angle (Spearman rank correlation
//! above 0.5). A failing sweep exits with code 1.
//!
//! Without `--checkpoint` the sweep runs on fresh random weights: the
//! property under test is built into the architecture, not learned.

use crate::errors::{runtime, runtime_at, validation, CliError};
use crate::manifest::{manifest_beside, RunManifest};
use clap::Args;
use equidesc::bench::synthetic_patch;
use equidesc::geom::{sample_uniform_rotation, RotationZYZ};
use equidesc::network::{init_weights, load_checkpoint, NetworkConfig};
use equidesc::orient::{canonicalize, descriptor_distance, raw_descriptor};
use nalgebra::{Rotation3, Unit, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

pub const SWEEP_ANGLES: usize = 12;
pub const ORIENTED_LIMIT: f64 = 0.1;
pub const SPEARMAN_LIMIT: f64 = 0.5;
/// Lattice resolution of the synthetic patches under test.
const PATCH_PER_SIDE: usize = 64;

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    /// CSV output path (angle, oriented median, unoriented median)
    #[arg(long)]
    pub out: PathBuf,
    /// Checkpoint to test; omitted = fresh random weights
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Number of random rotation axes
    #[arg(long, default_value_t = 10)]
    pub axes: usize,
    /// Seed for all randomness of this command
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Ranks with ties sharing their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn run(args: CheckArgs) -> Result<(), CliError> {
    let started = Instant::now();
    if args.axes == 0 {
        return Err(validation("--axes must be at least 1"));
    }

    let weights = match &args.checkpoint {
        Some(path) => {
            let (weights, _) =
                load_checkpoint(path).map_err(|e| runtime_at(path.display(), e))?;
            weights
        }
        None => {
            let mut wrng = ChaCha8Rng::seed_from_u64(args.seed);
            init_weights(&NetworkConfig::probe_scale(), &mut wrng).map_err(runtime)?
        }
    };
    let radius = weights.config.support_radius;
    let origin = Vector3::zeros();

    let angles: Vec<f64> = (0..SWEEP_ANGLES)
        .map(|i| std::f64::consts::PI * i as f64 / (SWEEP_ANGLES - 1) as f64)
        .collect();
    let mut oriented: Vec<Vec<f64>> = vec![Vec::with_capacity(args.axes); SWEEP_ANGLES];
    let mut unoriented: Vec<Vec<f64>> = vec![Vec::with_capacity(args.axes); SWEEP_ANGLES];

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(1));
    for _ in 0..args.axes {
        let patch = synthetic_patch(radius, PATCH_PER_SIDE, &mut rng);
        // A uniformly random direction: a Haar-random rotation of e_z.
        let axis = sample_uniform_rotation(&mut rng).to_matrix() * Vector3::z();
        let d0 = raw_descriptor(&patch, &origin, &weights).map_err(runtime)?;
        let norm0 = d0.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            return Err(runtime("degenerate reference descriptor (all zeros)"));
        }
        for (k, &angle) in angles.iter().enumerate() {
            let matrix = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
            let r = RotationZYZ::from_matrix(matrix.matrix());
            let rotated = patch.rotated_about(&r, &origin);
            let d_rot = raw_descriptor(&rotated, &origin, &weights).map_err(runtime)?;
            let re_oriented = canonicalize(&d_rot, &r);
            oriented[k].push(descriptor_distance(&re_oriented, &d0).map_err(runtime)? / norm0);
            unoriented[k].push(descriptor_distance(&d_rot, &d0).map_err(runtime)? / norm0);
        }
    }

    let mut csv = String::from("angle,oriented_rel,unoriented_rel\n");
    let mut oriented_medians = Vec::with_capacity(SWEEP_ANGLES);
    let mut unoriented_medians = Vec::with_capacity(SWEEP_ANGLES);
    for k in 0..SWEEP_ANGLES {
        let om = median(&mut oriented[k]);
        let um = median(&mut unoriented[k]);
        writeln!(csv, "{},{om},{um}", angles[k]).expect("string write");
        oriented_medians.push(om);
        unoriented_medians.push(um);
    }
    std::fs::write(&args.out, csv).map_err(|e| runtime_at(args.out.display(), e))?;

    let config = serde_json::to_value(&args).map_err(runtime)?;
    let mut manifest = RunManifest::new("check", config, args.seed);
    if let Some(path) = &args.checkpoint {
        manifest.add_input(path)?;
    }
    manifest.write(&manifest_beside(&args.out), started)?;

    let max_oriented = oriented_medians.iter().cloned().fold(0.0, f64::max);
    let rho = spearman(&angles, &unoriented_medians);
    let oriented_ok = max_oriented <= ORIENTED_LIMIT;
    let monotone_ok = rho > SPEARMAN_LIMIT;
    let summary = serde_json::json!({
        "command": "check",
        "pass": oriented_ok && monotone_ok,
        "max_oriented_rel": max_oriented,
        "oriented_limit": ORIENTED_LIMIT,
        "spearman_unoriented": rho,
        "spearman_limit": SPEARMAN_LIMIT,
    });
    crate::errors::print_line(&summary);
    if !(oriented_ok && monotone_ok) {
        return Err(runtime(format!(
            "equivariance sweep failed: max oriented median {max_oriented} \
             (limit {ORIENTED_LIMIT}), unoriented Spearman {rho} (must exceed {SPEARMAN_LIMIT})"
        )));
    }
    Ok(())
}
