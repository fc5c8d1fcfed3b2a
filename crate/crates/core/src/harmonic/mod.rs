//! Harmonic analysis on the sphere and the rotation group.
//!
//! Everything here is pinned to one set of conventions so that the forward
//! and inverse transforms, spectral rotation, and spectral correlation agree
//! with each other exactly (up to round-off) for band-limited signals:
//!
//! * Rotations use the z-y-z angle convention of [`crate::geom::RotationZYZ`].
//! * The sphere basis function of degree `l`, order `m` evaluated at grid
//!   direction `(alpha, beta)` is `sqrt(2l+1) * d_{m,0}^l(beta) * exp(-i m alpha)`,
//!   where `d^l` is the real Wigner rotation kernel of [`wigner`].
//! * The rotation-group basis function of degree `l`, orders `(m, n)` is
//!   `sqrt(2l+1) * exp(-i m alpha) * d_{m,n}^l(beta) * exp(-i n gamma)`.
//! * Both bases are orthonormal with respect to the *normalized* invariant
//!   measure (total mass one), matching the grid weights in [`crate::geom`].
//! * Rotating a signal by `r` multiplies each degree-`l` coefficient block by
//!   the conjugated matrix `conj(D^l(r))` with
//!   `D^l_{m,n}(r) = exp(-i m alpha) d^l_{m,n}(beta) exp(-i n gamma)`.
//!
//! The correlation of a signal with a filter over all rotations then has the
//! per-degree spectrum `G^l = H^l (F^l)^dagger / sqrt(2l+1)` (summed over
//! channels), which is what the layered feature extractors build on.

pub mod correlate;
pub mod rotate;
pub mod spectral;
pub mod wigner;

pub use correlate::{s2_correlation, so3_correlation, CorrelationBackend};
pub use rotate::{
    rotate_s2_signal, rotate_s2_spectrum, rotate_so3_signal, rotate_so3_spectrum, RotateMethod,
};
pub use spectral::{
    random_bandlimited_s2, random_bandlimited_so3, HarmonicPlan, S2Spectrum, So3Spectrum,
};
