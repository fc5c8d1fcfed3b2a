//! Benchmark construction: pose-randomized copies of existing fragment
//! pairs, and a self-contained synthetic scene generator with exact ground
//! truth.

use super::{compute_overlap, BenchError, FragmentPair};
use crate::geom::{sample_uniform_rotation, PointCloud, RigidTransform, RotationZYZ};
use nalgebra::Vector3;
use rand::{Rng, RngExt};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Rotates each fragment about its own centroid and rewrites the ground
/// truth so the pair stays consistent: with fragment motions `A_s` and
/// `A_t`, the new pose is `A_s * T * A_t^-1`. Overlap is geometry-invariant
/// and carries over unchanged.
pub fn rotate_fragment_pair(
    pair: &FragmentPair,
    r_source: &RotationZYZ,
    r_target: &RotationZYZ,
) -> FragmentPair {
    let source_pivot = pair.source.centroid();
    let target_pivot = pair.target.centroid();
    let motion_source = RigidTransform::rotation_about(r_source, &source_pivot);
    let motion_target = RigidTransform::rotation_about(r_target, &target_pivot);
    let gt_pose = motion_source.compose(&pair.gt_pose.compose(&motion_target.inverse()));
    FragmentPair {
        source: pair.source.rotated_about(r_source, &source_pivot),
        target: pair.target.rotated_about(r_target, &target_pivot),
        gt_pose,
        overlap: pair.overlap,
    }
}

/// Applies an independent uniformly random rotation to every fragment of
/// every pair (source draw first, then target, pairs in order), keeping the
/// ground truth exact.
pub fn make_rotated_benchmark<R: Rng + ?Sized>(
    pairs: &[FragmentPair],
    rng: &mut R,
) -> Vec<FragmentPair> {
    pairs
        .iter()
        .map(|pair| {
            let r_source = sample_uniform_rotation(rng);
            let r_target = sample_uniform_rotation(rng);
            rotate_fragment_pair(pair, &r_source, &r_target)
        })
        .collect()
}

/// Parameters of the synthetic bumpy-terrain benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Number of fragment pairs to generate.
    pub pairs: usize,
    /// Points sampled per fragment.
    pub points_per_fragment: usize,
    /// Standard deviation of per-point height noise, meters.
    pub noise_sigma: f64,
    /// Requested shared fraction of each fragment's footprint, in (0, 1].
    pub overlap_target: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            pairs: 4,
            points_per_fragment: 2000,
            noise_sigma: 0.005,
            overlap_target: 0.5,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.pairs == 0 {
            return Err(BenchError::InvalidConfig("pairs must be at least 1".into()));
        }
        if self.points_per_fragment == 0 {
            return Err(BenchError::InvalidConfig(
                "points_per_fragment must be at least 1".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(BenchError::InvalidConfig(format!(
                "noise_sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        if !(self.overlap_target > 0.0 && self.overlap_target <= 1.0) {
            return Err(BenchError::InvalidConfig(format!(
                "overlap_target must lie in (0, 1], got {}",
                self.overlap_target
            )));
        }
        Ok(())
    }
}

/// A smooth two-bump disc patch clipped to the ball of `radius` around the
/// origin, sampled on a `per_side x per_side` lattice, with bump placement,
/// height, and width drawn from `rng`. The surface passes through the
/// origin, so the origin works as an on-surface keypoint; the geometry has a
/// clear normal and one dominant elevation extremum, which keeps reference
/// frames well-conditioned. Intended for pose-sensitivity probes.
pub fn synthetic_patch<R: Rng + ?Sized>(
    radius: f64,
    per_side: usize,
    rng: &mut R,
) -> PointCloud {
    let c1x = rng.random_range(0.2..0.4) * radius;
    let c1y = rng.random_range(-0.1..0.1) * radius;
    let h1 = rng.random_range(0.35..0.55) * radius;
    let w1 = rng.random_range(0.14..0.22) * radius * radius;
    let c2x = rng.random_range(-0.35..-0.15) * radius;
    let c2y = rng.random_range(0.2..0.4) * radius;
    let h2 = rng.random_range(0.15..0.3) * radius;
    let w2 = rng.random_range(0.1..0.16) * radius * radius;
    let height = |x: f64, y: f64| {
        h1 * (-((x - c1x).powi(2) + (y - c1y).powi(2)) / w1).exp()
            + h2 * (-((x - c2x).powi(2) + (y - c2y).powi(2)) / w2).exp()
    };
    let z0 = height(0.0, 0.0);
    let mut pts = Vec::new();
    for i in 0..per_side {
        for j in 0..per_side {
            let x = (i as f64 / (per_side - 1) as f64 - 0.5) * 1.9 * radius;
            let y = (j as f64 / (per_side - 1) as f64 - 0.5) * 1.9 * radius;
            let p = Vector3::new(x, y, height(x, y) - z0);
            if p.norm() <= radius {
                pts.push(p);
            }
        }
    }
    PointCloud::new(pts)
}

/// Fragment footprint edge length, meters.
const WINDOW: f64 = 0.8;
/// Depth of the terrain strip, meters.
const DEPTH: f64 = 0.8;
/// Gaussian bumps per scene.
const BUMPS: usize = 8;
/// Inlier distance used when measuring the achieved overlap.
const OVERLAP_INLIER_DIST: f64 = 0.05;

struct Bump {
    center_x: f64,
    center_y: f64,
    height: f64,
    sigma: f64,
}

fn terrain_height(bumps: &[Bump], x: f64, y: f64) -> f64 {
    bumps
        .iter()
        .map(|b| {
            let dx = x - b.center_x;
            let dy = y - b.center_y;
            b.height * (-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma)).exp()
        })
        .sum()
}

/// Generates fragment pairs over random bumpy terrain. The two fragments of
/// a pair scan side-by-side windows whose footprints share
/// `overlap_target` of their width; points in the shared strip are sampled
/// once and observed by both scans (with independent height noise), so at
/// zero noise and full overlap the scans coincide exactly. The source
/// fragment lives in the world frame; the target fragment is expressed in
/// its own frame through a random rigid motion whose inverse is recorded as
/// the ground-truth pose. The achieved overlap is measured, not assumed.
pub fn generate_synthetic_scene<R: Rng + ?Sized>(
    spec: &SceneSpec,
    rng: &mut R,
) -> Result<Vec<FragmentPair>, BenchError> {
    spec.validate()?;
    let mut pairs = Vec::with_capacity(spec.pairs);
    for _ in 0..spec.pairs {
        pairs.push(generate_pair(spec, rng)?);
    }
    Ok(pairs)
}

fn generate_pair<R: Rng + ?Sized>(
    spec: &SceneSpec,
    rng: &mut R,
) -> Result<FragmentPair, BenchError> {
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| BenchError::InvalidConfig(format!("noise distribution: {e}")))?;
    let shared_fraction = spec.overlap_target;
    let span = (2.0 - shared_fraction) * WINDOW;
    let bumps: Vec<Bump> = (0..BUMPS)
        .map(|_| Bump {
            center_x: rng.random_range(0.0..span),
            center_y: rng.random_range(0.0..DEPTH),
            height: rng.random_range(0.05..0.25),
            sigma: rng.random_range(0.08..0.20),
        })
        .collect();

    // Source window x in [0, W]; target window x in [(1-s)W, (2-s)W]; the
    // strip [(1-s)W, W] is seen by both scans.
    let shared_lo = (1.0 - shared_fraction) * WINDOW;
    let n_shared = ((spec.points_per_fragment as f64) * shared_fraction).round() as usize;
    let n_shared = n_shared.min(spec.points_per_fragment);
    let n_exclusive = spec.points_per_fragment - n_shared;

    let mut source_points = Vec::with_capacity(spec.points_per_fragment);
    let mut target_world = Vec::with_capacity(spec.points_per_fragment);
    for _ in 0..n_shared {
        let x = rng.random_range(shared_lo..WINDOW);
        let y = rng.random_range(0.0..DEPTH);
        let z = terrain_height(&bumps, x, y);
        let seen_by_source = z + noise.sample(rng);
        let seen_by_target = z + noise.sample(rng);
        source_points.push(Vector3::new(x, y, seen_by_source));
        target_world.push(Vector3::new(x, y, seen_by_target));
    }
    for _ in 0..n_exclusive {
        let x = rng.random_range(0.0..shared_lo.max(f64::MIN_POSITIVE));
        let y = rng.random_range(0.0..DEPTH);
        let z = terrain_height(&bumps, x, y) + noise.sample(rng);
        source_points.push(Vector3::new(x, y, z));
    }
    for _ in 0..n_exclusive {
        let x = rng.random_range(WINDOW..WINDOW + (span - WINDOW).max(f64::MIN_POSITIVE));
        let y = rng.random_range(0.0..DEPTH);
        let z = terrain_height(&bumps, x, y) + noise.sample(rng);
        target_world.push(Vector3::new(x, y, z));
    }

    // The ground truth maps target-frame points back into the world (source)
    // frame, so the target cloud is the inverse image of its world points.
    let motion = RigidTransform::new(
        sample_uniform_rotation(rng).to_matrix(),
        Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ),
    );
    let inverse = motion.inverse();
    let sensor_world = Vector3::new(span / 2.0, DEPTH / 2.0, 3.0);
    let mut source = PointCloud::new(source_points);
    source.sensor_origin = Some(sensor_world);
    let mut target = PointCloud::new(target_world.iter().map(|p| inverse.apply(p)).collect());
    target.sensor_origin = Some(inverse.apply(&sensor_world));

    let overlap = compute_overlap(&source, &target, &motion, OVERLAP_INLIER_DIST)?;
    FragmentPair::new(source, target, motion, overlap)
}
