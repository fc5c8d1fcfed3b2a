//! Correlation of a signal with a filter over all rotations.
//!
//! The correlation value at rotation `R` is the inner product of the signal
//! with the rotated filter under the normalized invariant measure, summed
//! over channels:
//!
//! ```text
//! C(R) = sum_c < f_c, rotate_R psi_c >
//! ```
//!
//! and is itself a function on the rotation group, returned sampled on the
//! `out_bandwidth` grid. Two backends compute it:
//!
//! * [`CorrelationBackend::Spectral`] — per-degree coefficient products.
//!   For sphere inputs `G^l = sum_c F_c^l (Psi_c^l)^H / sqrt(2l+1)` where the
//!   column vector times conjugated row vector is an outer product; for
//!   rotation-group inputs the same formula with matrix blocks. One inverse
//!   transform then lands the result on the output grid.
//! * [`CorrelationBackend::Direct`] — for every output grid rotation,
//!   rotate the filter's band-limited interpolant exactly (through its
//!   spectrum), sample it back on the input grid, and take the quadrature
//!   inner product with the raw signal values.
//!
//! Both backends agree to round-off for any grid input because the quadrature
//! rule is exact on products of band-limited factors; the direct path exists
//! as an independently-structured witness of that identity and for spot
//! checks, the spectral path is the one everything else uses.

use num_complex::Complex64;

use crate::harmonic::rotate::rotate_so3_spectrum;
use crate::harmonic::spectral::{HarmonicPlan, S2Spectrum, So3Spectrum};
use crate::harmonic::wigner;
use crate::signal::{So3Signal, SphericalSignal};

/// Which evaluation strategy a correlation call uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationBackend {
    /// Quadrature inner products against explicitly rotated filters.
    Direct,
    /// Per-degree coefficient products in the harmonic domain.
    Spectral,
}

/// Spectrum of the correlation of two sphere spectra, channels summed.
pub fn s2_correlate_spectra(signal: &S2Spectrum, filter: &S2Spectrum) -> So3Spectrum {
    assert_eq!(signal.bandwidth, filter.bandwidth, "bandwidth mismatch");
    assert_eq!(signal.channels, filter.channels, "channel mismatch");
    let b = signal.bandwidth;
    let mut out = So3Spectrum::zeros(1, b);
    for c in 0..signal.channels {
        for l in 0..b {
            let scale = 1.0 / (2.0 * l as f64 + 1.0).sqrt();
            for m in -(l as i64)..=(l as i64) {
                let fm = signal.get(c, l, m);
                if fm == Complex64::ZERO {
                    continue;
                }
                for n in -(l as i64)..=(l as i64) {
                    let v = out.get(0, l, m, n) + scale * fm * filter.get(c, l, n).conj();
                    out.set(0, l, m, n, v);
                }
            }
        }
    }
    out
}

/// Spectrum of the correlation of two rotation-group spectra, channels summed.
pub fn so3_correlate_spectra(signal: &So3Spectrum, filter: &So3Spectrum) -> So3Spectrum {
    assert_eq!(signal.bandwidth, filter.bandwidth, "bandwidth mismatch");
    assert_eq!(signal.channels, filter.channels, "channel mismatch");
    let b = signal.bandwidth;
    let mut out = So3Spectrum::zeros(1, b);
    for c in 0..signal.channels {
        let h = signal.channel(c);
        let p = filter.channel(c);
        let g = out.channel_mut(0);
        for l in 0..b {
            let w = 2 * l + 1;
            let base = wigner::block_offset(l);
            let scale = 1.0 / (2.0 * l as f64 + 1.0).sqrt();
            // G^l += H^l (P^l)^H / sqrt(2l+1)
            for mi in 0..w {
                for ni in 0..w {
                    let mut acc = Complex64::ZERO;
                    for ki in 0..w {
                        acc += h[base + mi * w + ki] * p[base + ni * w + ki].conj();
                    }
                    g[base + mi * w + ni] += scale * acc;
                }
            }
        }
    }
    out
}

/// Correlation of sphere signals, sampled on the `out_bandwidth` grid.
pub fn s2_correlation(
    signal: &SphericalSignal,
    filter: &SphericalSignal,
    out_bandwidth: usize,
    backend: CorrelationBackend,
) -> So3Signal {
    assert_eq!(signal.bandwidth, filter.bandwidth, "bandwidth mismatch");
    assert_eq!(signal.channels(), filter.channels(), "channel mismatch");
    assert!(
        out_bandwidth >= 1 && out_bandwidth <= signal.bandwidth,
        "output bandwidth must be in 1..=input bandwidth"
    );
    let plan = HarmonicPlan::get(signal.bandwidth);
    let out_plan = HarmonicPlan::get(out_bandwidth);
    match backend {
        CorrelationBackend::Spectral => {
            let f = plan.s2_analyze(signal);
            let p = plan.s2_analyze(filter);
            out_plan.so3_synthesize(&s2_correlate_spectra(&f, &p))
        }
        CorrelationBackend::Direct => {
            // Correlation couples equal degrees only, so dropping the output
            // degrees >= out_bandwidth is the same as dropping them from the
            // filter up front; that keeps this path identical to the spectral
            // one under bandwidth reduction.
            let p = plan.s2_analyze(filter).truncated(out_bandwidth);
            let n_out = 2 * out_bandwidth;
            let n_in = 2 * signal.bandwidth;
            let mut out = So3Signal::zeros(1, out_bandwidth);
            for j in 0..n_out {
                for k in 0..n_out {
                    for g in 0..n_out {
                        let q = out_plan.so3.rotation(j, k, g);
                        let rotated =
                            plan.s2_synthesize(&crate::harmonic::rotate::rotate_s2_spectrum(&p, &q));
                        let mut acc = 0.0;
                        for c in 0..signal.channels() {
                            for jj in 0..n_in {
                                for kk in 0..n_in {
                                    acc += plan.sphere.row_weight[kk]
                                        * signal.values[[c, jj, kk]]
                                        * rotated.values[[c, jj, kk]];
                                }
                            }
                        }
                        out.values[[0, j, k, g]] = acc;
                    }
                }
            }
            out
        }
    }
}

/// Correlation of rotation-group signals, sampled on the `out_bandwidth` grid.
pub fn so3_correlation(
    signal: &So3Signal,
    filter: &So3Signal,
    out_bandwidth: usize,
    backend: CorrelationBackend,
) -> So3Signal {
    assert_eq!(signal.bandwidth, filter.bandwidth, "bandwidth mismatch");
    assert_eq!(signal.channels(), filter.channels(), "channel mismatch");
    assert!(
        out_bandwidth >= 1 && out_bandwidth <= signal.bandwidth,
        "output bandwidth must be in 1..=input bandwidth"
    );
    let plan = HarmonicPlan::get(signal.bandwidth);
    let out_plan = HarmonicPlan::get(out_bandwidth);
    match backend {
        CorrelationBackend::Spectral => {
            let h = plan.so3_analyze(signal);
            let p = plan.so3_analyze(filter);
            out_plan.so3_synthesize(&so3_correlate_spectra(&h, &p))
        }
        CorrelationBackend::Direct => {
            // See the sphere path: truncating the filter here mirrors the
            // spectral path's output truncation exactly.
            let p = plan.so3_analyze(filter).truncated(out_bandwidth);
            let n_out = 2 * out_bandwidth;
            let n_in = 2 * signal.bandwidth;
            let mut out = So3Signal::zeros(1, out_bandwidth);
            for j in 0..n_out {
                for k in 0..n_out {
                    for g in 0..n_out {
                        let q = out_plan.so3.rotation(j, k, g);
                        let rotated = plan.so3_synthesize(&rotate_so3_spectrum(&p, &q));
                        let mut acc = 0.0;
                        for c in 0..signal.channels() {
                            for jj in 0..n_in {
                                for kk in 0..n_in {
                                    for gg in 0..n_in {
                                        acc += plan.so3.row_weight[kk]
                                            * signal.values[[c, jj, kk, gg]]
                                            * rotated.values[[c, jj, kk, gg]];
                                    }
                                }
                            }
                        }
                        out.values[[0, j, k, g]] = acc;
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
    use crate::geom::{sample_uniform_rotation, RotationZYZ};
    use crate::harmonic::rotate::{rotate_s2_signal, rotate_so3_signal, RotateMethod};
    use crate::harmonic::spectral::{
        eval_s2_at, eval_so3_at, random_bandlimited_s2, random_bandlimited_so3,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute-force sphere correlation: pull every input grid direction back
    /// through the output rotation and evaluate the filter's interpolant
    /// pointwise. Shares no code with either production backend past the
    /// forward transform.
    fn brute_s2(
        signal: &SphericalSignal,
        filter_spec: &S2Spectrum,
        out_bandwidth: usize,
    ) -> So3Signal {
        let plan = HarmonicPlan::get(signal.bandwidth);
        let out_plan = HarmonicPlan::get(out_bandwidth);
        let n_out = 2 * out_bandwidth;
        let n_in = signal.n();
        let mut out = So3Signal::zeros(1, out_bandwidth);
        for j in 0..n_out {
            for k in 0..n_out {
                for g in 0..n_out {
                    let q = out_plan.so3.rotation(j, k, g).inverse().to_matrix();
                    let mut acc = 0.0;
                    for c in 0..signal.channels() {
                        for jj in 0..n_in {
                            for kk in 0..n_in {
                                let (a, bet) =
                                    (plan.sphere.alphas[jj], plan.sphere.betas[kk]);
                                let dir = nalgebra::Vector3::new(
                                    bet.sin() * a.cos(),
                                    bet.sin() * a.sin(),
                                    bet.cos(),
                                );
                                let src = q * dir;
                                // atan2 keeps full precision when the
                                // pulled-back direction grazes a pole.
                                let sb = src.x.hypot(src.y).atan2(src.z);
                                let sa = src.y.atan2(src.x);
                                acc += plan.sphere.row_weight[kk]
                                    * signal.values[[c, jj, kk]]
                                    * eval_s2_at(filter_spec, c, sa, sb);
                            }
                        }
                    }
                    out.values[[0, j, k, g]] = acc;
                }
            }
        }
        out
    }

    /// Brute-force rotation-group correlation via pointwise evaluation.
    fn brute_so3(
        signal: &So3Signal,
        filter_spec: &So3Spectrum,
        out_bandwidth: usize,
    ) -> So3Signal {
        let plan = HarmonicPlan::get(signal.bandwidth);
        let out_plan = HarmonicPlan::get(out_bandwidth);
        let n_out = 2 * out_bandwidth;
        let n_in = signal.n();
        let mut out = So3Signal::zeros(1, out_bandwidth);
        for j in 0..n_out {
            for k in 0..n_out {
                for g in 0..n_out {
                    let qinv = out_plan.so3.rotation(j, k, g).inverse();
                    let mut acc = 0.0;
                    for c in 0..signal.channels() {
                        for jj in 0..n_in {
                            for kk in 0..n_in {
                                for gg in 0..n_in {
                                    let src = qinv.compose(&plan.so3.rotation(jj, kk, gg));
                                    acc += plan.so3.row_weight[kk]
                                        * signal.values[[c, jj, kk, gg]]
                                        * eval_so3_at(filter_spec, c, &src);
                                }
                            }
                        }
                    }
                    out.values[[0, j, k, g]] = acc;
                }
            }
        }
        out
    }

    fn max_abs_diff(a: &So3Signal, b: &So3Signal) -> f64 {
        a.values
            .iter()
            .zip(b.values.iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    fn max_abs(a: &So3Signal) -> f64 {
        a.values.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn constant_inputs_give_constant_product() {
        let b = 3;
        let mut f = SphericalSignal::zeros(1, b);
        f.values.fill(1.5);
        let mut p = SphericalSignal::zeros(1, b);
        p.values.fill(-2.0);
        for backend in [CorrelationBackend::Spectral, CorrelationBackend::Direct] {
            let c = s2_correlation(&f, &p, b, backend);
            for v in c.values.iter() {
                assert!((v - (-3.0)).abs() < 1e-10, "{backend:?}: {v}");
            }
        }
    }

    #[test]
    fn direct_and_spectral_backends_agree_s2() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for &(b, out_b, ch) in &[(2usize, 2usize, 1usize), (3, 3, 2), (4, 2, 1)] {
            let (f, _) = random_bandlimited_s2(&mut rng, b, ch, 0.3);
            let (p, _) = random_bandlimited_s2(&mut rng, b, ch, 0.3);
            let spectral = s2_correlation(&f, &p, out_b, CorrelationBackend::Spectral);
            let direct = s2_correlation(&f, &p, out_b, CorrelationBackend::Direct);
            let d = max_abs_diff(&spectral, &direct);
            assert!(d < 1e-9, "b={b} out={out_b}: max diff {d}");
        }
    }

    #[test]
    fn direct_and_spectral_backends_agree_so3() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for &(b, out_b, ch) in &[(2usize, 2usize, 2usize), (3, 2, 1)] {
            let (h, _) = random_bandlimited_so3(&mut rng, b, ch, 0.3);
            let (p, _) = random_bandlimited_so3(&mut rng, b, ch, 0.3);
            let spectral = so3_correlation(&h, &p, out_b, CorrelationBackend::Spectral);
            let direct = so3_correlation(&h, &p, out_b, CorrelationBackend::Direct);
            let d = max_abs_diff(&spectral, &direct);
            assert!(d < 1e-9, "b={b} out={out_b}: max diff {d}");
        }
    }

    #[test]
    fn backends_agree_on_non_bandlimited_grids() {
        // Raw histogram-like grids (not band-limited) must still agree: the
        // identity is a property of the shared quadrature, not of the signal.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let b = 3;
        let mut f = SphericalSignal::zeros(1, b);
        let mut p = SphericalSignal::zeros(1, b);
        for v in f.values.iter_mut() {
            *v = rand::RngExt::random_range(&mut rng, 0.0..4.0_f64).floor();
        }
        for v in p.values.iter_mut() {
            *v = rand::RngExt::random_range(&mut rng, 0.0..4.0_f64).floor();
        }
        let spectral = s2_correlation(&f, &p, b, CorrelationBackend::Spectral);
        let direct = s2_correlation(&f, &p, b, CorrelationBackend::Direct);
        assert!(max_abs_diff(&spectral, &direct) < 1e-9);
    }

    #[test]
    fn matches_bruteforce_oracle_s2() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for &b in &[2usize, 3] {
            let (f, _) = random_bandlimited_s2(&mut rng, b, 2, 0.2);
            let (p, pspec) = random_bandlimited_s2(&mut rng, b, 2, 0.2);
            let got = s2_correlation(&f, &p, b, CorrelationBackend::Spectral);
            let want = brute_s2(&f, &pspec, b);
            let d = max_abs_diff(&got, &want);
            assert!(d < 1e-9, "b={b}: max diff {d}");
        }
    }

    #[test]
    fn matches_bruteforce_oracle_so3() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let b = 2;
        let (h, _) = random_bandlimited_so3(&mut rng, b, 2, 0.2);
        let (p, pspec) = random_bandlimited_so3(&mut rng, b, 2, 0.2);
        let got = so3_correlation(&h, &p, b, CorrelationBackend::Spectral);
        let want = brute_so3(&h, &pspec, b);
        let d = max_abs_diff(&got, &want);
        assert!(d < 1e-9, "max diff {d}");
    }

    #[test]
    fn channel_sum_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let b = 3;
        let (f, _) = random_bandlimited_s2(&mut rng, b, 2, 0.3);
        let (p, _) = random_bandlimited_s2(&mut rng, b, 2, 0.3);
        let joint = s2_correlation(&f, &p, b, CorrelationBackend::Spectral);
        let mut sum = So3Signal::zeros(1, b);
        for c in 0..2 {
            let fc = SphericalSignal {
                bandwidth: b,
                values: f
                    .values
                    .index_axis(ndarray::Axis(0), c)
                    .to_owned()
                    .insert_axis(ndarray::Axis(0)),
            };
            let pc = SphericalSignal {
                bandwidth: b,
                values: p
                    .values
                    .index_axis(ndarray::Axis(0), c)
                    .to_owned()
                    .insert_axis(ndarray::Axis(0)),
            };
            let part = s2_correlation(&fc, &pc, b, CorrelationBackend::Spectral);
            sum.values += &part.values;
        }
        assert!(max_abs_diff(&joint, &sum) < 1e-10);
    }

    #[test]
    fn equivariance_exact_on_spectral_path() {
        // Correlating a spectrally rotated signal equals spectrally rotating
        // the correlation, for arbitrary rotations.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let b = 4;
        let (f, _) = random_bandlimited_s2(&mut rng, b, 2, 0.3);
        let (p, _) = random_bandlimited_s2(&mut rng, b, 2, 0.3);
        for _ in 0..3 {
            let r = sample_uniform_rotation(&mut rng);
            let lhs = s2_correlation(
                &rotate_s2_signal(&f, &r, RotateMethod::Spectral),
                &p,
                b,
                CorrelationBackend::Spectral,
            );
            let rhs = rotate_so3_signal(
                &s2_correlation(&f, &p, b, CorrelationBackend::Spectral),
                &r,
                RotateMethod::Spectral,
            );
            let d = max_abs_diff(&lhs, &rhs);
            assert!(d < 1e-9, "max diff {d}");
        }
        // Same on the rotation group.
        let (h, _) = random_bandlimited_so3(&mut rng, 3, 1, 0.3);
        let (q, _) = random_bandlimited_so3(&mut rng, 3, 1, 0.3);
        let r = sample_uniform_rotation(&mut rng);
        let lhs = so3_correlation(
            &rotate_so3_signal(&h, &r, RotateMethod::Spectral),
            &q,
            3,
            CorrelationBackend::Spectral,
        );
        let rhs = rotate_so3_signal(
            &so3_correlation(&h, &q, 3, CorrelationBackend::Spectral),
            &r,
            RotateMethod::Spectral,
        );
        assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn equivariance_approximate_with_interpolated_rotation() {
        // Rotating by interpolation instead of spectrally leaves a small
        // equivariance residual; it must stay under a few percent for smooth
        // signals at working resolution.
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let b = 8;
        let (f, _) = random_bandlimited_s2(&mut rng, b, 1, 2.0);
        let (p, _) = random_bandlimited_s2(&mut rng, b, 1, 2.0);
        let r = sample_uniform_rotation(&mut rng);
        let lhs = s2_correlation(
            &rotate_s2_signal(&f, &r, RotateMethod::Interpolate),
            &p,
            b,
            CorrelationBackend::Spectral,
        );
        let rhs = rotate_so3_signal(
            &s2_correlation(&f, &p, b, CorrelationBackend::Spectral),
            &r,
            RotateMethod::Spectral,
        );
        let rel = max_abs_diff(&lhs, &rhs) / max_abs(&rhs).max(1e-12);
        assert!(rel < 3e-2, "relative equivariance residual {rel}");
    }

    #[test]
    fn grid_aligned_shift_equivariance_is_exact_even_interpolated() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let b = 4;
        let n = 2 * b;
        let (f, _) = random_bandlimited_s2(&mut rng, b, 1, 0.3);
        let (p, _) = random_bandlimited_s2(&mut rng, b, 1, 0.3);
        let r = RotationZYZ::new(2.0 * std::f64::consts::TAU / n as f64, 0.0, 0.0);
        let lhs = s2_correlation(
            &rotate_s2_signal(&f, &r, RotateMethod::Interpolate),
            &p,
            b,
            CorrelationBackend::Spectral,
        );
        let rhs = rotate_so3_signal(
            &s2_correlation(&f, &p, b, CorrelationBackend::Spectral),
            &r,
            RotateMethod::Interpolate,
        );
        assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn autocorrelation_peaks_next_to_identity() {
        // Correlating a signal with itself is maximal at the identity; on the
        // grid the winners are the bins closest to it: lowest latitude row,
        // alpha and gamma cancelling. A smooth signal keeps a clear margin.
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let b = 4;
        let n = 2 * b;
        let (h, _) = random_bandlimited_so3(&mut rng, b, 1, 1.5);
        let c = so3_correlation(&h, &h, b, CorrelationBackend::Spectral);
        let mut best = (0usize, 0usize, 0usize);
        let mut best_v = f64::NEG_INFINITY;
        for j in 0..n {
            for k in 0..n {
                for g in 0..n {
                    let v = c.values[[0, j, k, g]];
                    if v > best_v {
                        best_v = v;
                        best = (j, k, g);
                    }
                }
            }
        }
        assert_eq!(best.1, 0, "peak latitude row: {best:?}");
        assert_eq!(
            (best.0 + best.2) % n,
            0,
            "peak alpha/gamma should cancel: {best:?}"
        );
    }

    #[test]
    fn output_bandwidth_truncates_the_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let b = 4;
        let out_b = 2;
        let (f, _) = random_bandlimited_s2(&mut rng, b, 1, 0.3);
        let (p, _) = random_bandlimited_s2(&mut rng, b, 1, 0.3);
        let low = s2_correlation(&f, &p, out_b, CorrelationBackend::Spectral);
        // Reference: correlate at full bandwidth, truncate the spectrum, and
        // synthesize on the small grid.
        let plan = HarmonicPlan::get(b);
        let spec = s2_correlate_spectra(&plan.s2_analyze(&f), &plan.s2_analyze(&p));
        let want = HarmonicPlan::get(out_b).so3_synthesize(&spec.truncated(out_b));
        assert!(max_abs_diff(&low, &want) < 1e-12);
    }
}

