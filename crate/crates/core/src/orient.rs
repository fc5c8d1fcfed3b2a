//! Rotation canonicalization for descriptors.
//!
//! A descriptor produced by the encoder is a scalar map over the rotation
//! group: rotating the input point neighborhood left-translates the map.  To
//! compare descriptors across poses, the map is re-expressed in a pose-fixed
//! frame by one of two routes:
//!
//! * **self-orientation** — find the densest cluster among the strongest
//!   response bins of the map itself, average those bin rotations, and undo
//!   that rotation ([`self_orient`] + [`canonicalize`]);
//! * **geometric frame** — build a repeatable local reference frame from the
//!   raw points (plane-fit normal plus a farthest-elevation tangent axis,
//!   [`compute_lrf`]) and undo the frame rotation.
//!
//! [`invariant_descriptor`] bundles either route with the encoder forward
//! pass; [`descriptor_distance`] is the plain Euclidean metric used downstream.

use crate::geom::{PointCloud, RotationZYZ, So3Grid};
use crate::harmonic::{rotate_so3_signal, RotateMethod};
use crate::network::{encoder_forward, Descriptor, ModelWeights, NetworkError};
use crate::signal::{build_spherical_signal, SignalError, SupportSpec};
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use thiserror::Error;

/// Fraction of the support radius used for the normal-estimation ball.
const NORMAL_BALL_FRACTION: f64 = 0.3;
/// Inner edge of the tangent-search annulus, as a fraction of the radius.
const ANNULUS_FRACTION: f64 = 0.85;
/// Eigenvalue ratio above which the plane-fit normal is considered unstable.
const NORMAL_AMBIGUITY_RATIO: f64 = 0.99;
/// Relative elevation below which no tangent direction is distinguished.
const TANGENT_FLOOR: f64 = 1e-9;
/// Minimum number of support points for any orientation computation.
/// Minimum number of in-support points required to encode a neighborhood.
pub const MIN_SUPPORT_POINTS: usize = 6;

#[derive(Debug, Error)]
pub enum OrientError {
    #[error("top_k must be between 1 and {bins}, got {got}")]
    InvalidTopK { got: usize, bins: usize },
    #[error("degenerate feature map: {0}")]
    DegenerateFeatureMap(String),
    #[error("need at least {needed} support points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("ambiguous normal: {0}")]
    AmbiguousNormal(String),
    #[error("ambiguous tangent direction: {0}")]
    AmbiguousTangent(String),
    #[error("descriptor lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("support radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Parameters for [`self_orient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientConfig {
    /// How many of the strongest response bins participate in peak clustering.
    pub top_k: usize,
}

impl Default for OrientConfig {
    fn default() -> Self {
        OrientConfig { top_k: 32 }
    }
}

impl OrientConfig {
    fn validate(&self, bins: usize) -> Result<(), OrientError> {
        if self.top_k == 0 || self.top_k > bins {
            return Err(OrientError::InvalidTopK {
                got: self.top_k,
                bins,
            });
        }
        Ok(())
    }
}

/// An orthonormal, right-handed local reference frame at a keypoint.
///
/// The rows of `rotation` are the frame axes `x`, `y`, `z` expressed in world
/// coordinates, so the matrix maps world vectors into frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub rotation: Matrix3<f64>,
}

impl LocalFrame {
    pub fn x_axis(&self) -> Vector3<f64> {
        self.rotation.row(0).transpose()
    }

    pub fn y_axis(&self) -> Vector3<f64> {
        self.rotation.row(1).transpose()
    }

    pub fn z_axis(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    /// The rotation to hand to [`canonicalize`].
    ///
    /// This is the transpose of the row-axis matrix (columns = axes).  With
    /// that choice two copies of a neighborhood related by a rotation `Q`
    /// carry frames `F` and `F Q^T`, whose canonicalizing rotations differ by
    /// a left factor of `Q` — exactly the left-translation the descriptor map
    /// picks up — so both copies canonicalize to the same map.
    pub fn canonicalizing_rotation(&self) -> RotationZYZ {
        RotationZYZ::from_matrix(&self.rotation.transpose())
    }
}

/// Projects a matrix onto the nearest rotation (Frobenius norm) via SVD,
/// forcing determinant +1.
fn polar_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("3x3 SVD always yields U");
    let vt = svd.v_t.expect("3x3 SVD always yields V^T");
    let det = (u * vt).determinant();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum())) * vt
}

/// Chordal mean of rotations: polar projection of the matrix sum.
fn chordal_mean(rotations: &[Matrix3<f64>]) -> Matrix3<f64> {
    let mut sum = Matrix3::zeros();
    for r in rotations {
        sum += r;
    }
    polar_rotation(&sum)
}

/// Estimates the dominant pose of a descriptor map from its strongest bins.
///
/// The `top_k` largest bins are clustered by counting, for each of them, how
/// many of the others fall in its 3x3x3 index neighborhood (first and third
/// Euler indices wrap, the middle one clamps at the grid edge).  The densest
/// neighborhood wins; ties go first to the neighborhood holding the largest
/// bin value, then to the lowest flat bin index.  The winning neighborhood's
/// member bin rotations are averaged in the chordal sense and the mean is
/// returned as Euler angles.
pub fn self_orient(d: &Descriptor, cfg: &OrientConfig) -> Result<RotationZYZ, OrientError> {
    let n = 2 * d.bandwidth;
    let bins = d.values.len();
    cfg.validate(bins)?;
    if d.values.iter().any(|v| !v.is_finite()) {
        return Err(OrientError::DegenerateFeatureMap(
            "non-finite bin value".into(),
        ));
    }
    let first = d.values[0];
    if d.values.iter().all(|&v| v == first) {
        return Err(OrientError::DegenerateFeatureMap(
            "all bins equal, no distinguished peak".into(),
        ));
    }

    // Strongest bins, value-descending with index-ascending tie-breaks.
    let mut order: Vec<usize> = (0..bins).collect();
    order.sort_unstable_by(|&a, &b| {
        d.values[b]
            .partial_cmp(&d.values[a])
            .expect("values checked finite")
            .then(a.cmp(&b))
    });
    let top: Vec<usize> = order[..cfg.top_k].to_vec();
    let mut is_top = vec![false; bins];
    for &t in &top {
        is_top[t] = true;
    }

    // Distinct top-bin cells in the 3x3x3 neighborhood of flat index `t`.
    // Deduplication matters at n = 2, where wrapping aliases the two offsets.
    let neighborhood = |t: usize| -> Vec<usize> {
        let (j, rest) = (t / (n * n), t % (n * n));
        let (k, l) = (rest / n, rest % n);
        let mut cells = Vec::with_capacity(27);
        for dj in -1i64..=1 {
            let jj = (j as i64 + dj).rem_euclid(n as i64) as usize;
            for dk in -1i64..=1 {
                let kk = k as i64 + dk;
                if kk < 0 || kk >= n as i64 {
                    continue; // the polar-angle axis does not wrap
                }
                for dl in -1i64..=1 {
                    let ll = (l as i64 + dl).rem_euclid(n as i64) as usize;
                    let flat = (jj * n + kk as usize) * n + ll;
                    if is_top[flat] && !cells.contains(&flat) {
                        cells.push(flat);
                    }
                }
            }
        }
        cells
    };

    let mut winner: Option<(usize, f64, usize, Vec<usize>)> = None;
    let mut sorted_top = top.clone();
    sorted_top.sort_unstable();
    for &t in &sorted_top {
        let cells = neighborhood(t);
        let density = cells.len();
        let peak = cells
            .iter()
            .map(|&c| d.values[c])
            .fold(f64::NEG_INFINITY, f64::max);
        let better = match &winner {
            None => true,
            Some((best_density, best_peak, _, _)) => {
                density > *best_density || (density == *best_density && peak > *best_peak)
            }
        };
        if better {
            winner = Some((density, peak, t, cells));
        }
    }
    let (_, _, _, members) = winner.expect("top_k >= 1 guarantees a candidate");

    let grid = So3Grid::new(d.bandwidth);
    let mats: Vec<Matrix3<f64>> = members
        .iter()
        .map(|&c| {
            let (j, rest) = (c / (n * n), c % (n * n));
            let (k, l) = (rest / n, rest % n);
            RotationZYZ::new(grid.alphas[j], grid.betas[k], grid.gammas[l]).to_matrix()
        })
        .collect();
    Ok(RotationZYZ::from_matrix(&chordal_mean(&mats)))
}

/// Re-expresses a descriptor map in the frame of `r`: the result's value at
/// rotation `X` is the input's value at `r * X`.  Canonicalizing a map with
/// its own dominant pose therefore moves that pose to the identity bin.
///
/// Exact (to round-off) because descriptor maps are band-limited: rotation is
/// applied in the spectral domain.
pub fn canonicalize(d: &Descriptor, r: &RotationZYZ) -> Descriptor {
    let rotated = rotate_so3_signal(&d.to_signal(), &r.inverse(), RotateMethod::Spectral);
    Descriptor::from_signal(&rotated)
}

/// Builds a repeatable geometric reference frame at `center`.
///
/// * `z`: smallest-eigenvector normal of the covariance of points within
///   `0.3 * radius`, flipped toward the cloud's sensor origin when present,
///   otherwise away from the support centroid.
/// * `x`: the support point in the annulus `[0.85 * radius, radius]` with the
///   greatest signed elevation along `z` (falling back to the whole support
///   when the annulus is empty), projected into the tangent plane.
/// * `y = z x x`, completing a right-handed frame.
///
/// Errors: fewer than 6 support points; an elevation-isotropic neighborhood
/// (two near-equal smallest covariance eigenvalues); no point elevated more
/// than `1e-9 * radius` out of the tangent plane.
pub fn compute_lrf(
    cloud: &PointCloud,
    center: &Vector3<f64>,
    radius: f64,
) -> Result<LocalFrame, OrientError> {
    if !(radius > 0.0) {
        return Err(OrientError::NonPositiveRadius(radius));
    }
    let support: Vec<Vector3<f64>> = cloud
        .points
        .iter()
        .map(|p| p - center)
        .filter(|q| q.norm() <= radius)
        .collect();
    if support.len() < MIN_SUPPORT_POINTS {
        return Err(OrientError::TooFewPoints {
            needed: MIN_SUPPORT_POINTS,
            got: support.len(),
        });
    }

    let inner: Vec<&Vector3<f64>> = support
        .iter()
        .filter(|q| q.norm() <= NORMAL_BALL_FRACTION * radius)
        .collect();
    if inner.len() < 3 {
        return Err(OrientError::AmbiguousNormal(format!(
            "plane fit underdetermined: {} points within {} * radius of the center",
            inner.len(),
            NORMAL_BALL_FRACTION
        )));
    }
    let inner_centroid: Vector3<f64> =
        inner.iter().fold(Vector3::zeros(), |acc, q| acc + **q) / inner.len() as f64;
    let mut cov = Matrix3::zeros();
    for q in &inner {
        let d = **q - inner_centroid;
        cov += d * d.transpose();
    }
    cov /= inner.len() as f64;

    let eig = SymmetricEigen::new(cov);
    let mut idx = [0usize, 1, 2];
    idx.sort_unstable_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("covariance eigenvalues are finite")
    });
    let (l0, l1) = (eig.eigenvalues[idx[0]], eig.eigenvalues[idx[1]]);
    let ratio = if l1 > 0.0 { l0 / l1 } else { 1.0 };
    if ratio > NORMAL_AMBIGUITY_RATIO {
        return Err(OrientError::AmbiguousNormal(format!(
            "two smallest covariance eigenvalues nearly equal (ratio {ratio:.4})"
        )));
    }
    let mut z: Vector3<f64> = eig.eigenvectors.column(idx[0]).normalize();
    match cloud.sensor_origin {
        Some(origin) => {
            if z.dot(&(origin - center)) < 0.0 {
                z = -z;
            }
        }
        None => {
            let support_centroid: Vector3<f64> =
                support.iter().sum::<Vector3<f64>>() / support.len() as f64;
            if z.dot(&support_centroid) > 0.0 {
                z = -z;
            }
        }
    }

    let annulus: Vec<&Vector3<f64>> = support
        .iter()
        .filter(|q| q.norm() >= ANNULUS_FRACTION * radius)
        .collect();
    let candidates: Vec<&Vector3<f64>> = if annulus.is_empty() {
        support.iter().collect()
    } else {
        annulus
    };
    let mut best: Option<(f64, &Vector3<f64>)> = None;
    let mut max_abs = 0.0f64;
    for q in &candidates {
        let s = z.dot(q);
        max_abs = max_abs.max(s.abs());
        if best.as_ref().is_none_or(|(bs, _)| s > *bs) {
            best = Some((s, q));
        }
    }
    if max_abs < TANGENT_FLOOR * radius {
        return Err(OrientError::AmbiguousTangent(format!(
            "no point elevated more than {TANGENT_FLOOR} * radius out of the tangent plane"
        )));
    }
    let (s_star, p_star) = best.expect("support is non-empty");
    let x_raw = p_star - s_star * z;
    if x_raw.norm() < TANGENT_FLOOR * radius {
        return Err(OrientError::AmbiguousTangent(
            "elevation extremum lies on the normal axis".into(),
        ));
    }
    let x = x_raw.normalize();
    let y = z.cross(&x);

    Ok(LocalFrame {
        rotation: Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]),
    })
}

/// Which canonicalization route [`invariant_descriptor`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientMode {
    /// Orient from the descriptor map's own peak cluster.
    SelfOrient,
    /// Orient from a geometric local reference frame on the raw points.
    Lrf,
}

/// Encodes the neighborhood of `center` without any canonicalization: the
/// result co-rotates with the input points. Needs the same minimum support
/// as the oriented routes.
pub fn raw_descriptor(
    cloud: &PointCloud,
    center: &Vector3<f64>,
    weights: &ModelWeights,
) -> Result<Descriptor, OrientError> {
    let radius = weights.config.support_radius;
    let support = cloud
        .points
        .iter()
        .filter(|p| (*p - center).norm() <= radius)
        .count();
    if support < MIN_SUPPORT_POINTS {
        return Err(OrientError::TooFewPoints {
            needed: MIN_SUPPORT_POINTS,
            got: support,
        });
    }
    let spec = SupportSpec::new(
        radius,
        weights.config.input_shells,
        weights.config.layers[0].in_bandwidth,
    )?;
    let signal = build_spherical_signal(cloud, center, &spec);
    let (descriptor, _) = encoder_forward(&signal, weights)?;
    Ok(descriptor)
}

/// Encodes the neighborhood of `center` and canonicalizes the resulting
/// descriptor with the route selected by `mode`.
pub fn invariant_descriptor(
    cloud: &PointCloud,
    center: &Vector3<f64>,
    weights: &ModelWeights,
    mode: OrientMode,
    cfg: &OrientConfig,
) -> Result<Descriptor, OrientError> {
    let descriptor = raw_descriptor(cloud, center, weights)?;
    let r = match mode {
        OrientMode::SelfOrient => self_orient(&descriptor, cfg)?,
        OrientMode::Lrf => {
            compute_lrf(cloud, center, weights.config.support_radius)?.canonicalizing_rotation()
        }
    };
    Ok(canonicalize(&descriptor, &r))
}

/// Euclidean distance between two descriptors of equal length.
pub fn descriptor_distance(a: &Descriptor, b: &Descriptor) -> Result<f64, OrientError> {
    if a.values.len() != b.values.len() {
        return Err(OrientError::LengthMismatch {
            a: a.values.len(),
            b: b.values.len(),
        });
    }
    Ok(a.values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}
