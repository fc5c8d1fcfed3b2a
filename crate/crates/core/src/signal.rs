//! Multi-shell spherical density signals built from point neighborhoods.
//!
//! A neighborhood of `center` is described by `K` concentric shells, each
//! sampled on the `2b x 2b` equiangular sphere grid. A point at offset `v`
//! from the center lands in the shell indexed by its radius fraction and in
//! the angular cell containing its direction; each cell stores a density:
//! the count normalized by the total number of in-support points and by the
//! fraction of solid angle the cell covers (cells near the poles are much
//! smaller than equatorial ones, and dividing by their area keeps a uniform
//! direction distribution flat across a shell).

use nalgebra::Vector3;
use ndarray::{Array3, Array4};
use thiserror::Error;

use crate::geom::{RotationZYZ, SphereGrid};

/// Points closer to the center than this fraction of the support radius have
/// no meaningful direction; they are assigned to the innermost shell's first
/// cell (`alpha = 0`, first beta row) by convention.
pub const CENTER_RADIUS_FACTOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("support radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("shell count must be at least 1")]
    NoShells,
    #[error("bandwidth must be at least 1")]
    ZeroBandwidth,
}

/// Geometry of the support region and its discretization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SupportSpec {
    /// Radius of the (closed) support ball.
    pub radius: f64,
    /// Number of concentric shells `K`.
    pub shells: usize,
    /// Angular bandwidth `b`; each shell is sampled on `2b x 2b` cells.
    pub bandwidth: usize,
}

impl SupportSpec {
    pub fn new(radius: f64, shells: usize, bandwidth: usize) -> Result<Self, SignalError> {
        if !(radius > 0.0) {
            return Err(SignalError::NonPositiveRadius(radius));
        }
        if shells == 0 {
            return Err(SignalError::NoShells);
        }
        if bandwidth == 0 {
            return Err(SignalError::ZeroBandwidth);
        }
        Ok(SupportSpec {
            radius,
            shells,
            bandwidth,
        })
    }
}

/// A `channels x 2b x 2b` signal on the sphere grid, indexed
/// `[channel][alpha][beta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalSignal {
    pub bandwidth: usize,
    pub values: Array3<f64>,
}

impl SphericalSignal {
    pub fn zeros(channels: usize, bandwidth: usize) -> Self {
        let n = 2 * bandwidth;
        SphericalSignal {
            bandwidth,
            values: Array3::zeros((channels, n, n)),
        }
    }

    pub fn channels(&self) -> usize {
        self.values.dim().0
    }

    pub fn n(&self) -> usize {
        2 * self.bandwidth
    }
}

/// A `channels x 2b x 2b x 2b` signal on the rotation-group grid, indexed
/// `[channel][alpha][beta][gamma]`.
#[derive(Debug, Clone, PartialEq)]
pub struct So3Signal {
    pub bandwidth: usize,
    pub values: Array4<f64>,
}

impl So3Signal {
    pub fn zeros(channels: usize, bandwidth: usize) -> Self {
        let n = 2 * bandwidth;
        So3Signal {
            bandwidth,
            values: Array4::zeros((channels, n, n, n)),
        }
    }

    pub fn channels(&self) -> usize {
        self.values.dim().0
    }

    pub fn n(&self) -> usize {
        2 * self.bandwidth
    }

    /// Flat index of grid cell `(j, k, l)` in `[alpha][beta][gamma]` order.
    pub fn flat_index(&self, j: usize, k: usize, l: usize) -> usize {
        (j * self.n() + k) * self.n() + l
    }
}

/// Bins getter for points around `center`: shell index, alpha cell, beta cell.
fn bin_point(
    v: &Vector3<f64>,
    spec: &SupportSpec,
    grid_n: usize,
) -> Option<(usize, usize, usize)> {
    let r = v.norm();
    if r > spec.radius {
        return None;
    }
    if r < CENTER_RADIUS_FACTOR * spec.radius {
        return Some((0, 0, 0));
    }
    let shell = ((spec.shells as f64 * r / spec.radius) as usize).min(spec.shells - 1);
    let mut alpha = v.y.atan2(v.x);
    if alpha < 0.0 {
        alpha += std::f64::consts::TAU;
    }
    let j = ((alpha / std::f64::consts::TAU * grid_n as f64) as usize).min(grid_n - 1);
    let beta = (v.z / r).clamp(-1.0, 1.0).acos();
    let k = ((beta / std::f64::consts::PI * grid_n as f64) as usize).min(grid_n - 1);
    Some((shell, j, k))
}

/// Builds the shell-density signal for the neighborhood of `center`.
///
/// Points outside the closed support ball are ignored. With no in-support
/// points the signal is identically zero.
pub fn build_spherical_signal(
    cloud: &crate::geom::PointCloud,
    center: &Vector3<f64>,
    spec: &SupportSpec,
) -> SphericalSignal {
    let n = 2 * spec.bandwidth;
    let grid = SphereGrid::new(spec.bandwidth);
    let mut counts = Array3::<u32>::zeros((spec.shells, n, n));
    let mut in_support = 0u64;
    for p in &cloud.points {
        if let Some((shell, j, k)) = bin_point(&(p - center), spec, n) {
            counts[[shell, j, k]] += 1;
            in_support += 1;
        }
    }
    let mut signal = SphericalSignal::zeros(spec.shells, spec.bandwidth);
    if in_support == 0 {
        return signal;
    }
    for shell in 0..spec.shells {
        for j in 0..n {
            for k in 0..n {
                let c = counts[[shell, j, k]];
                if c > 0 {
                    signal.values[[shell, j, k]] =
                        c as f64 / (in_support as f64 * grid.cell_solid_fraction(k));
                }
            }
        }
    }
    signal
}

/// Rotates a cloud about a pivot; convenience re-export of the cloud method
/// so signal-building call sites read naturally.
pub fn rotate_point_cloud(
    cloud: &crate::geom::PointCloud,
    rotation: &RotationZYZ,
    pivot: &Vector3<f64>,
) -> crate::geom::PointCloud {
    cloud.rotated_about(rotation, pivot)
}
