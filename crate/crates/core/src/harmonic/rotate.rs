//! Rotating grid signals and spectra.
//!
//! Rotating a signal means pre-composing with the inverse rotation:
//! `(rotate_r f)(x) = f(r^-1 x)` on the sphere and
//! `(rotate_r h)(q) = h(r^-1 q)` on the rotation group. Two evaluation paths
//! are offered:
//!
//! * [`RotateMethod::Spectral`] — exact for band-limited signals: transform,
//!   multiply each degree-`l` coefficient block by `conj(D^l(r))`, transform
//!   back.
//! * [`RotateMethod::Interpolate`] — pull each output node back through the
//!   rotation and bilinearly (sphere) or trilinearly (rotation group) blend
//!   the neighboring grid values, wrapping the periodic angles and clamping
//!   the latitude. Cheap, works for any signal, but approximate: accuracy is
//!   limited by grid resolution. Rotations that land every node exactly on
//!   another node (multiples of the alpha/gamma spacing about z) reduce to
//!   permutations and are exact here too.

use num_complex::Complex64;

use crate::geom::RotationZYZ;
use crate::harmonic::spectral::{HarmonicPlan, S2Spectrum, So3Spectrum};
use crate::harmonic::wigner::{self, wigner_series};
use crate::signal::{So3Signal, SphericalSignal};

/// How to carry a grid signal through a rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotateMethod {
    /// Through the harmonic domain; exact for band-limited signals.
    Spectral,
    /// Multilinear interpolation on the grid.
    Interpolate,
}

/// When an interpolation coordinate is within this distance of an exact grid
/// index, it snaps to that index so aligned rotations stay exact.
const SNAP_EPS: f64 = 1e-9;

/// The degree-`l` representation matrices of `r`, all `l < bandwidth`, in the
/// flat block layout of [`wigner`]:
/// `D^l_{m,n}(r) = exp(-i m alpha) d^l_{m,n}(beta) exp(-i n gamma)`.
pub fn rotation_matrix_blocks(bandwidth: usize, r: &RotationZYZ) -> Vec<Complex64> {
    let d = wigner_series(bandwidth, r.beta);
    let mut out = vec![Complex64::ZERO; wigner::total_len(bandwidth)];
    for l in 0..bandwidth {
        let w = 2 * l + 1;
        let blk = d.block(l);
        let base = wigner::block_offset(l);
        for mi in 0..w {
            let m = mi as i64 - l as i64;
            let pa = Complex64::new(0.0, -(m as f64) * r.alpha).exp();
            for ni in 0..w {
                let n = ni as i64 - l as i64;
                let pg = Complex64::new(0.0, -(n as f64) * r.gamma).exp();
                out[base + mi * w + ni] = pa * blk[mi * w + ni] * pg;
            }
        }
    }
    out
}

/// Rotates a sphere spectrum: each degree block is multiplied by
/// `conj(D^l(r))`.
pub fn rotate_s2_spectrum(spectrum: &S2Spectrum, r: &RotationZYZ) -> S2Spectrum {
    let b = spectrum.bandwidth;
    let dmats = rotation_matrix_blocks(b, r);
    let mut out = S2Spectrum::zeros(spectrum.channels, b);
    for c in 0..spectrum.channels {
        for l in 0..b {
            let w = 2 * l + 1;
            let base = wigner::block_offset(l);
            for mi in 0..w {
                let mut acc = Complex64::ZERO;
                for ki in 0..w {
                    acc += dmats[base + mi * w + ki].conj()
                        * spectrum.get(c, l, ki as i64 - l as i64);
                }
                out.set(c, l, mi as i64 - l as i64, acc);
            }
        }
    }
    out
}

/// Rotates a rotation-group spectrum: each degree block is left-multiplied by
/// `conj(D^l(r))`.
pub fn rotate_so3_spectrum(spectrum: &So3Spectrum, r: &RotationZYZ) -> So3Spectrum {
    let b = spectrum.bandwidth;
    let dmats = rotation_matrix_blocks(b, r);
    let mut out = So3Spectrum::zeros(spectrum.channels, b);
    for c in 0..spectrum.channels {
        for l in 0..b {
            let w = 2 * l + 1;
            let base = wigner::block_offset(l);
            let src = spectrum.channel(c);
            let dst = out.channel_mut(c);
            for mi in 0..w {
                for ni in 0..w {
                    let mut acc = Complex64::ZERO;
                    for ki in 0..w {
                        acc += dmats[base + mi * w + ki].conj() * src[base + ki * w + ni];
                    }
                    dst[base + mi * w + ni] = acc;
                }
            }
        }
    }
    out
}

/// Splits a fractional index into neighbor indices and the high-side weight,
/// snapping near-integral coordinates.
fn split_periodic(f: f64, n: usize) -> (usize, usize, f64) {
    let nf = n as f64;
    let mut f = f % nf;
    if f < 0.0 {
        f += nf;
    }
    let i0 = f.floor() as usize % n;
    let frac = f - f.floor();
    if frac < SNAP_EPS {
        (i0, i0, 0.0)
    } else if frac > 1.0 - SNAP_EPS {
        let i = (i0 + 1) % n;
        (i, i, 0.0)
    } else {
        (i0, (i0 + 1) % n, frac)
    }
}

/// As [`split_periodic`] but clamping to `[0, n-1]` instead of wrapping.
fn split_clamped(f: f64, n: usize) -> (usize, usize, f64) {
    let f = f.clamp(0.0, (n - 1) as f64);
    let i0 = (f.floor() as usize).min(n - 1);
    let frac = f - i0 as f64;
    if frac < SNAP_EPS || i0 + 1 >= n {
        (i0, i0, 0.0)
    } else if frac > 1.0 - SNAP_EPS {
        (i0 + 1, i0 + 1, 0.0)
    } else {
        (i0, i0 + 1, frac)
    }
}

/// Fractional sphere-grid coordinates of the direction `(alpha, beta)`.
fn s2_fractional(alpha: f64, beta: f64, n: usize) -> (f64, f64) {
    let fa = alpha / std::f64::consts::TAU * n as f64;
    // Latitudes sit at beta_k = pi (2k+1) / (2n), so the fractional index is
    // beta / (pi/n) - 1/2.
    let fb = beta / std::f64::consts::PI * n as f64 - 0.5;
    (fa, fb)
}

pub fn rotate_s2_signal(
    signal: &SphericalSignal,
    r: &RotationZYZ,
    method: RotateMethod,
) -> SphericalSignal {
    match method {
        RotateMethod::Spectral => {
            let plan = HarmonicPlan::get(signal.bandwidth);
            plan.s2_synthesize(&rotate_s2_spectrum(&plan.s2_analyze(signal), r))
        }
        RotateMethod::Interpolate => {
            let n = signal.n();
            let rinv = r.inverse().to_matrix();
            let mut out = SphericalSignal::zeros(signal.channels(), signal.bandwidth);
            for j in 0..n {
                for k in 0..n {
                    let (alpha, beta) = (
                        std::f64::consts::TAU * j as f64 / n as f64,
                        std::f64::consts::PI * (2.0 * k as f64 + 1.0) / (2.0 * n as f64),
                    );
                    let dir = nalgebra::Vector3::new(
                        beta.sin() * alpha.cos(),
                        beta.sin() * alpha.sin(),
                        beta.cos(),
                    );
                    let src = rinv * dir;
                    let sb = src.x.hypot(src.y).atan2(src.z);
                    let sa = {
                        let a = src.y.atan2(src.x);
                        if a < 0.0 {
                            a + std::f64::consts::TAU
                        } else {
                            a
                        }
                    };
                    let (fa, fb) = s2_fractional(sa, sb, n);
                    let (j0, j1, wa) = split_periodic(fa, n);
                    let (k0, k1, wb) = split_clamped(fb, n);
                    for c in 0..signal.channels() {
                        let v = (1.0 - wa)
                            * ((1.0 - wb) * signal.values[[c, j0, k0]]
                                + wb * signal.values[[c, j0, k1]])
                            + wa * ((1.0 - wb) * signal.values[[c, j1, k0]]
                                + wb * signal.values[[c, j1, k1]]);
                        out.values[[c, j, k]] = v;
                    }
                }
            }
            out
        }
    }
}

pub fn rotate_so3_signal(
    signal: &So3Signal,
    r: &RotationZYZ,
    method: RotateMethod,
) -> So3Signal {
    match method {
        RotateMethod::Spectral => {
            let plan = HarmonicPlan::get(signal.bandwidth);
            plan.so3_synthesize(&rotate_so3_spectrum(&plan.so3_analyze(signal), r))
        }
        RotateMethod::Interpolate => {
            let n = signal.n();
            let rinv = r.inverse();
            let mut out = So3Signal::zeros(signal.channels(), signal.bandwidth);
            for j in 0..n {
                for k in 0..n {
                    for g in 0..n {
                        let q = RotationZYZ::new(
                            std::f64::consts::TAU * j as f64 / n as f64,
                            std::f64::consts::PI * (2.0 * k as f64 + 1.0) / (2.0 * n as f64),
                            std::f64::consts::TAU * g as f64 / n as f64,
                        );
                        let src = rinv.compose(&q);
                        let fa = src.alpha / std::f64::consts::TAU * n as f64;
                        let fg = src.gamma / std::f64::consts::TAU * n as f64;
                        let fb = src.beta / std::f64::consts::PI * n as f64 - 0.5;
                        let (j0, j1, wa) = split_periodic(fa, n);
                        let (g0, g1, wg) = split_periodic(fg, n);
                        let (k0, k1, wb) = split_clamped(fb, n);
                        for c in 0..signal.channels() {
                            let mut v = 0.0;
                            for (jj, wja) in [(j0, 1.0 - wa), (j1, wa)] {
                                for (kk, wkb) in [(k0, 1.0 - wb), (k1, wb)] {
                                    for (gg, wgg) in [(g0, 1.0 - wg), (g1, wg)] {
                                        v += wja * wkb * wgg * signal.values[[c, jj, kk, gg]];
                                    }
                                }
                            }
                            out.values[[c, j, k, g]] = v;
                        }
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::spectral::{
        eval_s2_at, eval_so3_at, random_bandlimited_s2, random_bandlimited_so3,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng) -> RotationZYZ {
        crate::geom::sample_uniform_rotation(rng)
    }

    #[test]
    fn spectral_rotation_matches_pointwise_pullback_s2() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = 5;
        let (_, spec) = random_bandlimited_s2(&mut rng, b, 2, 0.3);
        for _ in 0..4 {
            let r = random_rotation(&mut rng);
            let rot = rotate_s2_spectrum(&spec, &r);
            let rinv = r.inverse().to_matrix();
            let plan = HarmonicPlan::get(b);
            for &j in &[0usize, 3, 7] {
                for &k in &[1usize, 4, 8] {
                    let (alpha, beta) = (plan.sphere.alphas[j], plan.sphere.betas[k]);
                    let dir = nalgebra::Vector3::new(
                        beta.sin() * alpha.cos(),
                        beta.sin() * alpha.sin(),
                        beta.cos(),
                    );
                    let src = rinv * dir;
                    let sb = src.x.hypot(src.y).atan2(src.z);
                    let sa = src.y.atan2(src.x);
                    for c in 0..2 {
                        let got = eval_s2_at(&rot, c, alpha, beta);
                        let want = eval_s2_at(&spec, c, sa, sb);
                        assert!(
                            (got - want).abs() < 1e-10,
                            "c={c} node ({j},{k}): {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn spectral_rotation_matches_pointwise_pullback_so3() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let b = 4;
        let (_, spec) = random_bandlimited_so3(&mut rng, b, 1, 0.3);
        for _ in 0..3 {
            let r = random_rotation(&mut rng);
            let rot = rotate_so3_spectrum(&spec, &r);
            let rinv = r.inverse();
            let plan = HarmonicPlan::get(b);
            for (j, k, g) in [(0usize, 2usize, 5usize), (3, 6, 1), (7, 4, 4)] {
                let q = plan.so3.rotation(j, k, g);
                let src = rinv.compose(&q);
                let got = eval_so3_at(&rot, 0, &q);
                let want = eval_so3_at(&spec, 0, &src);
                assert!((got - want).abs() < 1e-10, "node ({j},{k},{g}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn rotation_blocks_compose_like_rotations() {
        // D(r1 r2) = D(r1) D(r2) for each degree block.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let b = 5;
        let r1 = random_rotation(&mut rng);
        let r2 = random_rotation(&mut rng);
        let d1 = rotation_matrix_blocks(b, &r1);
        let d2 = rotation_matrix_blocks(b, &r2);
        let d12 = rotation_matrix_blocks(b, &r1.compose(&r2));
        for l in 0..b {
            let w = 2 * l + 1;
            let base = wigner::block_offset(l);
            for mi in 0..w {
                for ni in 0..w {
                    let mut acc = Complex64::ZERO;
                    for ki in 0..w {
                        acc += d1[base + mi * w + ki] * d2[base + ki * w + ni];
                    }
                    let want = d12[base + mi * w + ni];
                    assert!((acc - want).norm() < 1e-11, "l={l} ({mi},{ni})");
                }
            }
        }
    }

    #[test]
    fn rotation_blocks_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let b = 6;
        let r = random_rotation(&mut rng);
        let d = rotation_matrix_blocks(b, &r);
        for l in 0..b {
            let w = 2 * l + 1;
            let base = wigner::block_offset(l);
            for a in 0..w {
                for bb in 0..w {
                    let mut acc = Complex64::ZERO;
                    for k in 0..w {
                        acc += d[base + a * w + k] * d[base + bb * w + k].conj();
                    }
                    let want = if a == bb { 1.0 } else { 0.0 };
                    assert!((acc - Complex64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spectral_signal_rotation_group_property() {
        // rotate(rotate(f, r1), r2) = rotate(f, r2 * r1).
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let b = 4;
        let (sig, _) = random_bandlimited_s2(&mut rng, b, 1, 0.2);
        let r1 = random_rotation(&mut rng);
        let r2 = random_rotation(&mut rng);
        let two_step = rotate_s2_signal(
            &rotate_s2_signal(&sig, &r1, RotateMethod::Spectral),
            &r2,
            RotateMethod::Spectral,
        );
        let one_step = rotate_s2_signal(&sig, &r2.compose(&r1), RotateMethod::Spectral);
        for (a, e) in two_step.values.iter().zip(one_step.values.iter()) {
            assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_rotation_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let (sig, _) = random_bandlimited_s2(&mut rng, 4, 1, 0.2);
        for method in [RotateMethod::Spectral, RotateMethod::Interpolate] {
            let out = rotate_s2_signal(&sig, &RotationZYZ::IDENTITY, method);
            for (a, e) in out.values.iter().zip(sig.values.iter()) {
                assert!((a - e).abs() < 1e-10, "{method:?}");
            }
        }
        let (hsig, _) = random_bandlimited_so3(&mut rng, 3, 1, 0.2);
        for method in [RotateMethod::Spectral, RotateMethod::Interpolate] {
            let out = rotate_so3_signal(&hsig, &RotationZYZ::IDENTITY, method);
            for (a, e) in out.values.iter().zip(hsig.values.iter()) {
                assert!((a - e).abs() < 1e-10, "{method:?}");
            }
        }
    }

    #[test]
    fn grid_aligned_z_rotation_is_exact_permutation() {
        // Rotating by one alpha step shifts columns; both paths must agree
        // exactly with the permuted signal.
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let b = 4;
        let n = 2 * b;
        let (sig, _) = random_bandlimited_s2(&mut rng, b, 2, 0.2);
        let step = RotationZYZ::new(std::f64::consts::TAU / n as f64, 0.0, 0.0);
        for method in [RotateMethod::Spectral, RotateMethod::Interpolate] {
            let out = rotate_s2_signal(&sig, &step, method);
            for c in 0..2 {
                for j in 0..n {
                    for k in 0..n {
                        let want = sig.values[[c, j, k]];
                        let got = out.values[[c, (j + 1) % n, k]];
                        assert!(
                            (got - want).abs() < 1e-10,
                            "{method:?} c={c} ({j},{k}): {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn interpolated_rotation_tracks_spectral_for_smooth_signals() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let b = 8;
        let (sig, _) = random_bandlimited_s2(&mut rng, 3, 1, 0.5);
        // Upsample the low-frequency signal onto the finer grid so the
        // interpolation error term is small.
        let plan3 = HarmonicPlan::get(3);
        let spec = plan3.s2_analyze(&sig);
        let fine = HarmonicPlan::get(b).s2_synthesize(&spec);
        let r = random_rotation(&mut rng);
        let exact = rotate_s2_signal(&fine, &r, RotateMethod::Spectral);
        let approx = rotate_s2_signal(&fine, &r, RotateMethod::Interpolate);
        let scale = fine.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for (a, e) in approx.values.iter().zip(exact.values.iter()) {
            worst = worst.max((a - e).abs());
        }
        assert!(
            worst < 0.05 * scale,
            "worst interpolation error {worst} vs scale {scale}"
        );
    }
}
