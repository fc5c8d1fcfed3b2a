//! Registration benchmark: cloud ingestion, preprocessing, descriptor
//! matching, registration-recall scoring, rotated-benchmark generation, and a
//! synthetic scene generator for small-scale end-to-end evaluation.

mod io;
mod preprocess;
mod recall;
mod synth;

pub use io::{load_cloud, load_pose, save_cloud, save_pose, CloudFormat};
pub use preprocess::{estimate_normals, sample_keypoints, voxel_downsample};
pub use recall::{
    compute_overlap, match_keypoints, recall_curve, registration_recall, DescribedPair,
    PairOutcome, RecallReport, TAU2_SWEEP_MAX, TAU2_SWEEP_MIN, TAU2_SWEEP_STEP,
};
pub use synth::{
    generate_synthetic_scene, make_rotated_benchmark, rotate_fragment_pair, synthetic_patch,
    SceneSpec,
};

use crate::geom::{PointCloud, RigidTransform};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("unknown format: {0}")]
    UnknownFormat(String),
    #[error("non-float property type for '{name}': {ty}")]
    NonFloatProperty { name: String, ty: String },
    #[error("element count mismatch: header declares {declared}, found {found}")]
    ElementCountMismatch { declared: usize, found: usize },
    #[error("empty cloud: {0}")]
    EmptyCloud(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("k = {k} exceeds cloud size {points}")]
    KTooLarge { k: usize, points: usize },
    #[error("cannot sample {n} keypoints from {points} points")]
    SampleTooLarge { n: usize, points: usize },
    #[error("pose rotation block is not a rotation (residual {0:.3e})")]
    PoseNotRigid(f64),
    #[error("{what} count mismatch: {a} vs {b}")]
    CountMismatch {
        what: &'static str,
        a: usize,
        b: usize,
    },
    #[error("no pairs meet the minimum overlap; cannot compute recall")]
    NoQualifyingPairs,
    #[error(transparent)]
    Descriptor(#[from] crate::orient::OrientError),
}

/// Two partially overlapping scans of the same scene with ground truth.
///
/// `gt_pose` maps target-frame coordinates into the source frame; `overlap`
/// is the symmetrized inlier fraction under that pose.
#[derive(Debug, Clone)]
pub struct FragmentPair {
    pub source: PointCloud,
    pub target: PointCloud,
    pub gt_pose: RigidTransform,
    pub overlap: f64,
}

impl FragmentPair {
    /// Validates the rigidity of the pose (rotation block orthonormal with
    /// determinant 1 within 1e-6) and the overlap range.
    pub fn new(
        source: PointCloud,
        target: PointCloud,
        gt_pose: RigidTransform,
        overlap: f64,
    ) -> Result<FragmentPair, BenchError> {
        check_rotation_block(&gt_pose.rotation)?;
        if !(0.0..=1.0).contains(&overlap) {
            return Err(BenchError::InvalidConfig(format!(
                "overlap must lie in [0, 1], got {overlap}"
            )));
        }
        Ok(FragmentPair {
            source,
            target,
            gt_pose,
            overlap,
        })
    }
}

pub(crate) fn check_rotation_block(r: &Matrix3<f64>) -> Result<(), BenchError> {
    let residual = (r.transpose() * r - Matrix3::identity()).norm();
    let det_err = (r.determinant() - 1.0).abs();
    let worst = residual.max(det_err);
    if worst > 1e-6 {
        return Err(BenchError::PoseNotRigid(worst));
    }
    Ok(())
}

/// Evaluation parameters for the registration-recall benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Inlier distance for a correct correspondence, meters.
    pub tau1: f64,
    /// Minimum inlier fraction for a pair to count as registered.
    pub tau2: f64,
    /// Pairs below this ground-truth overlap are not evaluated.
    pub min_overlap: f64,
    /// Keypoints sampled per fragment.
    pub n_keypoints: usize,
    /// Voxel edge length for downsampling, meters.
    pub voxel: f64,
    /// Neighborhood size for normal estimation.
    pub normal_k: usize,
    /// Descriptor support radius, meters.
    pub support_radius: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tau1: 0.10,
            tau2: 0.05,
            min_overlap: 0.30,
            n_keypoints: 5000,
            voxel: 0.02,
            normal_k: 17,
            support_radius: 0.30,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let positive = [
            ("tau1", self.tau1),
            ("voxel", self.voxel),
            ("support_radius", self.support_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(BenchError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let fractions = [("tau2", self.tau2), ("min_overlap", self.min_overlap)];
        for (name, v) in fractions {
            if !(v > 0.0 && v <= 1.0) {
                return Err(BenchError::InvalidConfig(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        if self.n_keypoints == 0 {
            return Err(BenchError::InvalidConfig(
                "n_keypoints must be at least 1".into(),
            ));
        }
        if self.normal_k < 3 {
            return Err(BenchError::InvalidConfig(
                "normal_k must be at least 3".into(),
            ));
        }
        Ok(())
    }
}
