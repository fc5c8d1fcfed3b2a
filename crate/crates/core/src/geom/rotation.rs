//! Rotations in intrinsic ZYZ Euler form.
//!
//! Every rotation is written `R = Rz(alpha) * Ry(beta) * Rz(gamma)` with
//! `beta` in `[0, pi]` and the two z-angles in `[0, 2*pi)`. This is the
//! parameterization the sampling grids and the harmonic transforms are built
//! on, so it is the lingua franca of the whole crate; conversion to and from
//! 3x3 matrices lives here and everything else goes through it.

use nalgebra::{Matrix3, Vector3};

/// Below this angle (radians) the middle Y-rotation is treated as degenerate:
/// the two z-rotations act about the same axis and only their sum (or
/// difference) is observable, so extraction pins `gamma = 0`.
pub const GIMBAL_EPS: f64 = 1e-9;

/// A rotation stored as intrinsic ZYZ Euler angles, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationZYZ {
    /// First z-rotation, applied last. Canonical range `[0, 2*pi)`.
    pub alpha: f64,
    /// Middle y-rotation. Canonical range `[0, pi]`.
    pub beta: f64,
    /// Final z-rotation, applied first. Canonical range `[0, 2*pi)`.
    pub gamma: f64,
}

/// Wraps an angle into `[0, 2*pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut r = a % tau;
    if r < 0.0 {
        r += tau;
    }
    // `-1e-20 % tau` rounds to tau itself; fold that back to zero.
    if r >= tau {
        r -= tau;
    }
    r
}

impl RotationZYZ {
    pub const IDENTITY: RotationZYZ = RotationZYZ {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        RotationZYZ { alpha, beta, gamma }
    }

    /// Builds the 3x3 matrix `Rz(alpha) * Ry(beta) * Rz(gamma)`.
    ///
    /// The product is expanded by hand so each entry costs one or two
    /// multiplies instead of two full matrix products:
    ///
    /// ```text
    /// Ry(b)*Rz(g) = | cb*cg  -cb*sg  sb |        Rz(a) = | ca  -sa  0 |
    ///               |    sg      cg   0 |                | sa   ca  0 |
    ///               | -sb*cg  sb*sg  cb |                |  0    0  1 |
    /// ```
    pub fn to_matrix(&self) -> Matrix3<f64> {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        let (sg, cg) = self.gamma.sin_cos();
        Matrix3::new(
            ca * cb * cg - sa * sg,
            -ca * cb * sg - sa * cg,
            ca * sb,
            sa * cb * cg + ca * sg,
            -sa * cb * sg + ca * cg,
            sa * sb,
            -sb * cg,
            sb * sg,
            cb,
        )
    }

    /// Recovers canonical ZYZ angles from a rotation matrix.
    ///
    /// `beta` comes from `atan2(hypot(m02, m12), m22)` rather than
    /// `acos(m22)`: the acos form loses half the significant digits near the
    /// poles, which matters because compositions that should collapse to the
    /// identity must round-trip to machine precision. When `sin(beta)`
    /// vanishes the z-axes align; we then put the whole z-rotation into
    /// `alpha` and set `gamma = 0`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let sb = (m[(0, 2)] * m[(0, 2)] + m[(1, 2)] * m[(1, 2)]).sqrt();
        let beta = sb.atan2(m[(2, 2)]);
        if beta < GIMBAL_EPS {
            // R ~= Rz(alpha + gamma): m10 = sin, m00 = cos of the sum.
            let alpha = wrap_angle(m[(1, 0)].atan2(m[(0, 0)]));
            return RotationZYZ::new(alpha, 0.0, 0.0);
        }
        if beta > std::f64::consts::PI - GIMBAL_EPS {
            // R ~= Rz(alpha - gamma) * Ry(pi): m10 = -sin, m00 = -cos of the
            // difference.
            let alpha = wrap_angle((-m[(1, 0)]).atan2(-m[(0, 0)]));
            return RotationZYZ::new(alpha, std::f64::consts::PI, 0.0);
        }
        let alpha = wrap_angle(m[(1, 2)].atan2(m[(0, 2)]));
        let gamma = wrap_angle(m[(2, 1)].atan2(-m[(2, 0)]));
        RotationZYZ::new(alpha, beta, gamma)
    }

    /// `self` followed after `other`: the result rotates by `other` first,
    /// i.e. the matrix product `M(self) * M(other)`.
    pub fn compose(&self, other: &RotationZYZ) -> RotationZYZ {
        RotationZYZ::from_matrix(&(self.to_matrix() * other.to_matrix()))
    }

    /// The inverse rotation, in closed form.
    ///
    /// `R^-1 = Rz(-gamma) * Ry(-beta) * Rz(-alpha)`; the identity
    /// `Ry(-b) = Rz(pi) * Ry(b) * Rz(-pi)` rewrites that back into canonical
    /// ZYZ form with a non-negative middle angle:
    /// `(pi - gamma, beta, pi - alpha)` up to wrapping.
    pub fn inverse(&self) -> RotationZYZ {
        if self.beta.abs() < GIMBAL_EPS {
            return RotationZYZ::new(wrap_angle(-self.alpha - self.gamma), 0.0, 0.0);
        }
        RotationZYZ::new(
            wrap_angle(std::f64::consts::PI - self.gamma),
            self.beta,
            wrap_angle(std::f64::consts::PI - self.alpha),
        )
    }

    /// Applies the rotation to a vector.
    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.to_matrix() * v
    }

    /// The rotation angle in `[0, pi]`, from the matrix trace.
    pub fn angle(&self) -> f64 {
        let tr = self.to_matrix().trace();
        (((tr - 1.0) / 2.0).clamp(-1.0, 1.0)).acos()
    }
}
