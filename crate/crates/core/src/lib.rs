//! Rotation-equivariant local 3D surface descriptors.
//!
//! The crate turns a point-cloud neighborhood into a multi-shell density
//! signal on the sphere, pushes it through a correlation network whose
//! feature maps live on the rotation group (so rotating the input rotates
//! every feature map the same way), and trains that encoder without labels
//! by asking a small folding decoder to redraw the input patch from the
//! descriptor alone. At test time descriptors are made rotation-invariant
//! either by reading a canonical orientation off the descriptor itself or by
//! aligning with an externally estimated local reference frame. A benchmark
//! harness measures the end result as registration recall on fragment pairs.

pub mod bench;
pub mod geom;
pub mod harmonic;
pub mod network;
pub mod orient;
pub mod signal;
pub mod train;

pub use geom::{PointCloud, RigidTransform, RotationZYZ};
pub use signal::{So3Signal, SphericalSignal, SupportSpec};
