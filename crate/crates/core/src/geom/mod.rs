//! Rotation parameterizations, sampling grids, point clouds, and random
//! rotations — the geometric substrate everything else builds on.

pub mod cloud;
pub mod grid;
pub mod rotation;
pub mod sample;

pub use cloud::{CloudError, PointCloud, RigidTransform};
pub use grid::{beta_quadrature_weights, So3Grid, SphereGrid};
pub use rotation::{wrap_angle, RotationZYZ};
pub use sample::sample_uniform_rotation;
