//! Uniform (Haar) random rotations.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::rotation::RotationZYZ;

/// Draws a rotation from the uniform distribution on the rotation group.
///
/// Four independent standard normal deviates, normalized, give a uniformly
/// distributed unit quaternion (the 4D Gaussian is isotropic, so its
/// direction is uniform on the 3-sphere and the double cover makes the
/// induced rotation Haar-uniform).
pub fn sample_uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> RotationZYZ {
    loop {
        let w: f64 = StandardNormal.sample(rng);
        let x: f64 = StandardNormal.sample(rng);
        let y: f64 = StandardNormal.sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        let n = (w * w + x * x + y * y + z * z).sqrt();
        // A vanishing draw carries no direction; resample (probability ~0).
        if n > 1e-12 {
            let q = UnitQuaternion::new_unchecked(Quaternion::new(w / n, x / n, y / n, z / n));
            let m = q.to_rotation_matrix();
            return RotationZYZ::from_matrix(m.matrix());
        }
    }
}
