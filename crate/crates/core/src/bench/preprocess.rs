//! Cloud preprocessing: voxel-grid downsampling, covariance normal
//! estimation, and uniform keypoint sampling.

use super::BenchError;
use crate::geom::PointCloud;
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, RngExt};
use std::collections::BTreeMap;

/// Replaces every occupied voxel of an axis-aligned grid with the centroid
/// of its member points. Output order follows the lexicographic voxel index,
/// so the result is deterministic and the operation is idempotent (a second
/// pass leaves every centroid alone). Normals are dropped; the sensor origin
/// carries over.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud, BenchError> {
    if !(voxel > 0.0) {
        return Err(BenchError::InvalidConfig(format!(
            "voxel edge must be positive, got {voxel}"
        )));
    }
    let mut cells: BTreeMap<(i64, i64, i64), (Vector3<f64>, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let key = (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        let entry = cells.entry(key).or_insert((Vector3::zeros(), 0));
        entry.0 += p;
        entry.1 += 1;
    }
    let points = cells
        .values()
        .map(|(sum, count)| sum / *count as f64)
        .collect();
    let mut out = PointCloud::new(points);
    out.sensor_origin = cloud.sensor_origin;
    Ok(out)
}

/// Estimates a unit normal per point from the covariance of its `k` nearest
/// neighbors (the point itself included). Normals are flipped toward
/// `viewpoint` when one is given, otherwise away from the cloud centroid.
/// Collinear neighborhoods get a deterministic normal orthogonal to the line.
pub fn estimate_normals(
    cloud: &PointCloud,
    k: usize,
    viewpoint: Option<Vector3<f64>>,
) -> Result<PointCloud, BenchError> {
    if k < 3 {
        return Err(BenchError::InvalidConfig(format!(
            "normal estimation needs k >= 3 neighbors, got {k}"
        )));
    }
    let n = cloud.points.len();
    if k > n {
        return Err(BenchError::KTooLarge { k, points: n });
    }
    let global_centroid = cloud.centroid();
    let mut normals = Vec::with_capacity(n);
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n);
    for p in &cloud.points {
        scratch.clear();
        scratch.extend(
            cloud
                .points
                .iter()
                .enumerate()
                .map(|(j, q)| ((q - p).norm_squared(), j)),
        );
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        scratch.select_nth_unstable_by(k - 1, cmp);
        scratch.truncate(k);
        // Fixed summation order keeps the covariance bit-deterministic.
        scratch.sort_unstable_by(cmp);
        let mut local_centroid = Vector3::zeros();
        for &(_, j) in &scratch {
            local_centroid += cloud.points[j];
        }
        local_centroid /= k as f64;
        let mut cov = Matrix3::zeros();
        for &(_, j) in &scratch {
            let d = cloud.points[j] - local_centroid;
            cov += d * d.transpose();
        }
        cov /= k as f64;
        let mut normal = plane_normal(&cov);
        let reference = match viewpoint {
            Some(vp) => vp - p,
            None => p - global_centroid,
        };
        if normal.dot(&reference) < 0.0 {
            normal = -normal;
        }
        normals.push(normal);
    }
    cloud
        .clone()
        .with_normals(normals)
        .map_err(|e| BenchError::InvalidConfig(e.to_string()))
}

/// Smallest-eigenvector normal with a deterministic fallback for rank-one
/// (collinear) and rank-zero (coincident) neighborhoods.
fn plane_normal(cov: &Matrix3<f64>) -> Vector3<f64> {
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_unstable_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let [lo, mid, hi] = order;
    let lambda_mid = eig.eigenvalues[mid].max(0.0);
    let lambda_hi = eig.eigenvalues[hi].max(0.0);
    if lambda_mid > 1e-12 * lambda_hi && lambda_hi > 0.0 {
        let v = eig.eigenvectors.column(lo).into_owned();
        return v.normalize();
    }
    // Neighbors lie on a line (or a single point): the normal direction is
    // ambiguous, so cross the dominant direction with the least-aligned
    // coordinate axis to pick one reproducibly.
    let line_dir = eig.eigenvectors.column(hi).into_owned();
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let least = axes
        .iter()
        .min_by(|a, b| {
            line_dir
                .dot(a)
                .abs()
                .total_cmp(&line_dir.dot(b).abs())
        })
        .expect("three candidate axes");
    let cross = line_dir.cross(least);
    if cross.norm() > 1e-12 {
        cross.normalize()
    } else {
        Vector3::z()
    }
}

/// Draws `n` distinct point indices uniformly at random (partial
/// Fisher-Yates), returned in ascending order.
pub fn sample_keypoints<R: Rng + ?Sized>(
    cloud: &PointCloud,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>, BenchError> {
    let len = cloud.points.len();
    if n > len {
        return Err(BenchError::SampleTooLarge { n, points: len });
    }
    let mut indices: Vec<usize> = (0..len).collect();
    for i in 0..n {
        let j = rng.random_range(i..len);
        indices.swap(i, j);
    }
    indices.truncate(n);
    indices.sort_unstable();
    Ok(indices)
}
