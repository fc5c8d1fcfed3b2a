//! Point clouds and rigid motions.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use super::rotation::RotationZYZ;

/// How far a stored normal may deviate from unit length.
pub const NORMAL_UNIT_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("normal count {normals} does not match point count {points}")]
    NormalCountMismatch { normals: usize, points: usize },
    #[error("normal {index} has length {len}, expected unit within {NORMAL_UNIT_EPS}")]
    NonUnitNormal { index: usize, len: f64 },
}

/// An unordered set of 3D points, optionally with per-point unit normals and
/// the sensor position the cloud was captured from (used to disambiguate
/// normal signs).
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub sensor_origin: Option<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        PointCloud {
            points,
            normals: None,
            sensor_origin: None,
        }
    }

    /// Attaches normals, checking count and unit length.
    pub fn with_normals(mut self, normals: Vec<Vector3<f64>>) -> Result<Self, CloudError> {
        if normals.len() != self.points.len() {
            return Err(CloudError::NormalCountMismatch {
                normals: normals.len(),
                points: self.points.len(),
            });
        }
        for (i, n) in normals.iter().enumerate() {
            let len = n.norm();
            if (len - 1.0).abs() > NORMAL_UNIT_EPS {
                return Err(CloudError::NonUnitNormal { index: i, len });
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        if self.points.is_empty() {
            return Vector3::zeros();
        }
        self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64
    }

    /// Axis-aligned bounding box as `(min, max)`; `None` when empty.
    pub fn bounding_box(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.points.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        Some((lo, hi))
    }

    /// Rotates the cloud about `pivot`; normals rotate with it, the sensor
    /// origin too (it is a point in the same frame).
    pub fn rotated_about(&self, rotation: &RotationZYZ, pivot: &Vector3<f64>) -> PointCloud {
        let m = rotation.to_matrix();
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| m * (p - pivot) + pivot)
                .collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| m * n).collect()),
            sensor_origin: self.sensor_origin.map(|o| m * (o - pivot) + pivot),
        }
    }

    /// Applies a rigid motion to every point (and rotates normals).
    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.rotation * n).collect()),
            sensor_origin: self.sensor_origin.map(|o| t.apply(&o)),
        }
    }
}

/// A rigid motion `p -> R*p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0),
        translation: Vector3::new(0.0, 0.0, 0.0),
    };

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    /// Pure rotation about a pivot point.
    pub fn rotation_about(rotation: &RotationZYZ, pivot: &Vector3<f64>) -> Self {
        let m = rotation.to_matrix();
        RigidTransform {
            rotation: m,
            translation: pivot - m * pivot,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self` applied after `other`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Row-major 4x4 homogeneous form, last row `0 0 0 1`.
    pub fn to_rows_4x4(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)], t[0]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)], t[1]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)], t[2]],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn from_rows_4x4(rows: &[[f64; 4]; 4]) -> Self {
        RigidTransform {
            rotation: Matrix3::new(
                rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
                rows[2][1], rows[2][2],
            ),
            translation: Vector3::new(rows[0][3], rows[1][3], rows[2][3]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_normals() {
        let cloud = PointCloud::new(vec![Vector3::zeros(), Vector3::x()]);
        let err = cloud
            .clone()
            .with_normals(vec![Vector3::z()])
            .expect_err("count mismatch");
        assert!(matches!(err, CloudError::NormalCountMismatch { .. }));
        let err = cloud
            .with_normals(vec![Vector3::z(), Vector3::z() * 1.5])
            .expect_err("non-unit");
        assert!(matches!(err, CloudError::NonUnitNormal { index: 1, .. }));
    }

    #[test]
    fn rotation_about_pivot_fixes_pivot() {
        let pivot = Vector3::new(1.0, -2.0, 0.5);
        let r = RotationZYZ::new(0.4, 1.1, 2.2);
        let t = RigidTransform::rotation_about(&r, &pivot);
        assert!((t.apply(&pivot) - pivot).norm() < 1e-12);
        let cloud = PointCloud::new(vec![pivot, pivot + Vector3::x()]);
        let rotated = cloud.rotated_about(&r, &pivot);
        assert!((rotated.points[0] - pivot).norm() < 1e-12);
        assert!(((rotated.points[1] - pivot).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_compose_inverse() {
        let r = RotationZYZ::new(0.3, 0.8, 1.9);
        let t = RigidTransform::new(r.to_matrix(), Vector3::new(0.1, 0.2, -0.3));
        let id = t.compose(&t.inverse());
        assert!((id.translation).norm() < 1e-12);
        assert!((id.rotation - Matrix3::identity()).norm() < 1e-12);
        let rows = t.to_rows_4x4();
        let back = RigidTransform::from_rows_4x4(&rows);
        assert_eq!(back, t);
    }
}
