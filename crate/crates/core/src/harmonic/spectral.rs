//! Forward and inverse harmonic transforms on the grids of [`crate::geom`].
//!
//! A [`HarmonicPlan`] caches everything that depends only on the bandwidth:
//! the grids, their quadrature weights, the rotation kernels `d^l_{m,n}` at
//! every grid latitude, and the complex exponential table used by the naive
//! length-`2b` discrete Fourier transforms over the periodic angles. Plans
//! are memoized globally because layer stacks reuse a handful of bandwidths
//! over and over.
//!
//! Conventions (see the module docs of [`crate::harmonic`]): analysis takes
//! the inner product with the conjugated basis function under the normalized
//! grid measure, so the angular sums carry `exp(+i m alpha)` factors and the
//! latitude sum carries the quadrature weight; synthesis sums coefficients
//! times the basis functions with `exp(-i m alpha)` factors. Both transforms
//! are exact inverses of each other on band-limited signals.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geom::{So3Grid, SphereGrid};
use crate::harmonic::wigner::{self, WignerSeries};
use crate::signal::{So3Signal, SphericalSignal};

/// Sphere spectrum: per channel, coefficients `F^l_m` for `l < bandwidth`,
/// `|m| <= l`, stored flat at index `l^2 + (l + m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct S2Spectrum {
    pub bandwidth: usize,
    pub channels: usize,
    pub data: Vec<Complex64>,
}

impl S2Spectrum {
    pub fn zeros(channels: usize, bandwidth: usize) -> Self {
        S2Spectrum {
            bandwidth,
            channels,
            data: vec![Complex64::ZERO; channels * bandwidth * bandwidth],
        }
    }

    /// Coefficients of one channel, length `bandwidth^2`.
    #[inline]
    pub fn channel(&self, c: usize) -> &[Complex64] {
        let len = self.bandwidth * self.bandwidth;
        &self.data[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.bandwidth * self.bandwidth;
        &mut self.data[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn get(&self, c: usize, l: usize, m: i64) -> Complex64 {
        self.channel(c)[l * l + (l as i64 + m) as usize]
    }

    #[inline]
    pub fn set(&mut self, c: usize, l: usize, m: i64, v: Complex64) {
        self.channel_mut(c)[l * l + (l as i64 + m) as usize] = v;
    }

    /// Drops all degrees `l >= new_bandwidth` (no-op when already narrower).
    pub fn truncated(&self, new_bandwidth: usize) -> S2Spectrum {
        let nb = new_bandwidth.min(self.bandwidth);
        let mut out = S2Spectrum::zeros(self.channels, new_bandwidth);
        for c in 0..self.channels {
            for l in 0..nb {
                for m in -(l as i64)..=(l as i64) {
                    out.set(c, l, m, self.get(c, l, m));
                }
            }
        }
        out
    }
}

/// Rotation-group spectrum: per channel, coefficients `H^l_{m,n}` stored in
/// the flat `(l, m, n)` layout of [`wigner`].
#[derive(Debug, Clone, PartialEq)]
pub struct So3Spectrum {
    pub bandwidth: usize,
    pub channels: usize,
    pub data: Vec<Complex64>,
}

impl So3Spectrum {
    pub fn zeros(channels: usize, bandwidth: usize) -> Self {
        So3Spectrum {
            bandwidth,
            channels,
            data: vec![Complex64::ZERO; channels * wigner::total_len(bandwidth)],
        }
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[Complex64] {
        let len = wigner::total_len(self.bandwidth);
        &self.data[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = wigner::total_len(self.bandwidth);
        &mut self.data[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn get(&self, c: usize, l: usize, m: i64, n: i64) -> Complex64 {
        self.channel(c)[wigner::block_offset(l) + wigner::entry_index(l, m, n)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, l: usize, m: i64, n: i64, v: Complex64) {
        self.channel_mut(c)[wigner::block_offset(l) + wigner::entry_index(l, m, n)] = v;
    }

    pub fn truncated(&self, new_bandwidth: usize) -> So3Spectrum {
        let nb = new_bandwidth.min(self.bandwidth);
        let mut out = So3Spectrum::zeros(self.channels, new_bandwidth);
        for c in 0..self.channels {
            for l in 0..nb {
                let w = 2 * l + 1;
                let src = wigner::block_offset(l);
                let dst = wigner::block_offset(l);
                let (sc, oc) = (self.channel(c), out.channel_mut(c));
                oc[dst..dst + w * w].copy_from_slice(&sc[src..src + w * w]);
            }
        }
        out
    }
}

/// Cached tables for transforms at one bandwidth.
pub struct HarmonicPlan {
    pub bandwidth: usize,
    pub sphere: SphereGrid,
    pub so3: So3Grid,
    /// Rotation kernels at each of the `2b` grid latitudes.
    pub rows: Vec<WignerSeries>,
    /// `twiddle[t] = exp(-2 pi i t / (2b))`.
    twiddle: Vec<Complex64>,
}

static PLAN_CACHE: OnceLock<Mutex<HashMap<usize, Arc<HarmonicPlan>>>> = OnceLock::new();

impl HarmonicPlan {
    pub fn new(bandwidth: usize) -> HarmonicPlan {
        assert!(bandwidth >= 1, "bandwidth must be at least 1");
        let sphere = SphereGrid::new(bandwidth);
        let so3 = So3Grid::new(bandwidth);
        let rows = sphere
            .betas
            .iter()
            .map(|&beta| wigner::wigner_series(bandwidth, beta))
            .collect();
        let n = 2 * bandwidth;
        let twiddle = (0..n)
            .map(|t| {
                let ang = -std::f64::consts::TAU * t as f64 / n as f64;
                Complex64::new(ang.cos(), ang.sin())
            })
            .collect();
        HarmonicPlan {
            bandwidth,
            sphere,
            so3,
            rows,
            twiddle,
        }
    }

    /// Globally memoized plan for `bandwidth`.
    pub fn get(bandwidth: usize) -> Arc<HarmonicPlan> {
        let cache = PLAN_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().unwrap();
        map.entry(bandwidth)
            .or_insert_with(|| Arc::new(HarmonicPlan::new(bandwidth)))
            .clone()
    }

    #[inline]
    fn n(&self) -> usize {
        2 * self.bandwidth
    }

    /// `exp(-2 pi i (a*b) / (2b))` via the cached table.
    #[inline]
    fn tw(&self, prod: i64) -> Complex64 {
        self.twiddle[prod.rem_euclid(self.n() as i64) as usize]
    }

    /// Forward sphere transform of all channels.
    pub fn s2_analyze(&self, signal: &SphericalSignal) -> S2Spectrum {
        assert_eq!(signal.bandwidth, self.bandwidth, "signal/plan bandwidth");
        let b = self.bandwidth;
        let n = self.n();
        let mut out = S2Spectrum::zeros(signal.channels(), b);
        let mut u = Array2::<Complex64>::zeros((n, n)); // [m bin][latitude]
        for c in 0..signal.channels() {
            // Angular sum: u[t][k] = sum_j f[j][k] exp(+i 2pi j t / n).
            u.fill(Complex64::ZERO);
            for j in 0..n {
                for k in 0..n {
                    let v = signal.values[[c, j, k]];
                    if v != 0.0 {
                        for t in 0..n {
                            u[[t, k]] += v * self.tw(-((j * t) as i64));
                        }
                    }
                }
            }
            // Latitude sum with quadrature weights and rotation kernels.
            for l in 0..b {
                let scale = (2.0 * l as f64 + 1.0).sqrt();
                for m in -(l as i64)..=(l as i64) {
                    let t = m.rem_euclid(n as i64) as usize;
                    let mut acc = Complex64::ZERO;
                    for k in 0..n {
                        acc += self.sphere.row_weight[k] * self.rows[k].get(l, m, 0) * u[[t, k]];
                    }
                    out.set(c, l, m, scale * acc);
                }
            }
        }
        out
    }

    /// Inverse sphere transform onto this plan's grid. A wider spectrum is
    /// truncated to this plan's bandwidth; a narrower one is zero-padded.
    pub fn s2_synthesize(&self, spectrum: &S2Spectrum) -> SphericalSignal {
        let b = self.bandwidth;
        let n = self.n();
        let lm = b.min(spectrum.bandwidth);
        let mut out = SphericalSignal::zeros(spectrum.channels, b);
        let mut v = Array2::<Complex64>::zeros((n, n)); // [m bin][latitude]
        for c in 0..spectrum.channels {
            v.fill(Complex64::ZERO);
            for l in 0..lm {
                let scale = (2.0 * l as f64 + 1.0).sqrt();
                for m in -(l as i64)..=(l as i64) {
                    let t = m.rem_euclid(n as i64) as usize;
                    let coef = scale * spectrum.get(c, l, m);
                    if coef != Complex64::ZERO {
                        for k in 0..n {
                            v[[t, k]] += coef * self.rows[k].get(l, m, 0);
                        }
                    }
                }
            }
            for j in 0..n {
                for k in 0..n {
                    let mut acc = Complex64::ZERO;
                    for t in 0..n {
                        let z = v[[t, k]];
                        if z != Complex64::ZERO {
                            acc += z * self.tw((j * t) as i64);
                        }
                    }
                    out.values[[c, j, k]] = acc.re;
                }
            }
        }
        out
    }

    /// Forward rotation-group transform of all channels.
    pub fn so3_analyze(&self, signal: &So3Signal) -> So3Spectrum {
        assert_eq!(signal.bandwidth, self.bandwidth, "signal/plan bandwidth");
        let b = self.bandwidth;
        let n = self.n();
        let mut out = So3Spectrum::zeros(signal.channels(), b);
        // p[m bin][latitude][n bin] = sum_{j,g} h[j][k][g] e^{+i m a_j} e^{+i n g_g}
        let mut stage = Array3::<Complex64>::zeros((n, n, n)); // [j][k][n bin]
        let mut p = Array3::<Complex64>::zeros((n, n, n));
        for c in 0..signal.channels() {
            stage.fill(Complex64::ZERO);
            for j in 0..n {
                for k in 0..n {
                    for g in 0..n {
                        let v = signal.values[[c, j, k, g]];
                        if v != 0.0 {
                            for t in 0..n {
                                stage[[j, k, t]] += v * self.tw(-((g * t) as i64));
                            }
                        }
                    }
                }
            }
            p.fill(Complex64::ZERO);
            for j in 0..n {
                for k in 0..n {
                    for tn in 0..n {
                        let z = stage[[j, k, tn]];
                        if z != Complex64::ZERO {
                            for tm in 0..n {
                                p[[tm, k, tn]] += z * self.tw(-((j * tm) as i64));
                            }
                        }
                    }
                }
            }
            for l in 0..b {
                let scale = (2.0 * l as f64 + 1.0).sqrt();
                for m in -(l as i64)..=(l as i64) {
                    let tm = m.rem_euclid(n as i64) as usize;
                    for mn in -(l as i64)..=(l as i64) {
                        let tn = mn.rem_euclid(n as i64) as usize;
                        let mut acc = Complex64::ZERO;
                        for k in 0..n {
                            acc += self.so3.row_weight[k]
                                * self.rows[k].get(l, m, mn)
                                * p[[tm, k, tn]];
                        }
                        out.set(c, l, m, mn, scale * acc);
                    }
                }
            }
        }
        out
    }

    /// Inverse rotation-group transform onto this plan's grid, truncating or
    /// zero-padding the spectrum to this plan's bandwidth.
    pub fn so3_synthesize(&self, spectrum: &So3Spectrum) -> So3Signal {
        let b = self.bandwidth;
        let n = self.n();
        let lm = b.min(spectrum.bandwidth);
        let mut out = So3Signal::zeros(spectrum.channels, b);
        let mut s = Array3::<Complex64>::zeros((n, n, n)); // [m bin][latitude][n bin]
        let mut stage = Array3::<Complex64>::zeros((n, n, n)); // [j][k][n bin]
        for c in 0..spectrum.channels {
            s.fill(Complex64::ZERO);
            for l in 0..lm {
                let scale = (2.0 * l as f64 + 1.0).sqrt();
                for m in -(l as i64)..=(l as i64) {
                    let tm = m.rem_euclid(n as i64) as usize;
                    for mn in -(l as i64)..=(l as i64) {
                        let tn = mn.rem_euclid(n as i64) as usize;
                        let coef = scale * spectrum.get(c, l, m, mn);
                        if coef != Complex64::ZERO {
                            for k in 0..n {
                                s[[tm, k, tn]] += coef * self.rows[k].get(l, m, mn);
                            }
                        }
                    }
                }
            }
            stage.fill(Complex64::ZERO);
            for tm in 0..n {
                for k in 0..n {
                    for tn in 0..n {
                        let z = s[[tm, k, tn]];
                        if z != Complex64::ZERO {
                            for j in 0..n {
                                stage[[j, k, tn]] += z * self.tw((j * tm) as i64);
                            }
                        }
                    }
                }
            }
            for j in 0..n {
                for k in 0..n {
                    for g in 0..n {
                        let mut acc = Complex64::ZERO;
                        for tn in 0..n {
                            let z = stage[[j, k, tn]];
                            if z != Complex64::ZERO {
                                acc += z * self.tw((g * tn) as i64);
                            }
                        }
                        out.values[[c, j, k, g]] = acc.re;
                    }
                }
            }
        }
        out
    }
}

/// Draws a random real band-limited sphere signal by sampling a spectrum with
/// the reality symmetry `F^l_{-m} = (-1)^m conj(F^l_m)` and synthesizing it.
/// Coefficient scale decays as `(1 + l)^{-decay}`.
pub fn random_bandlimited_s2<R: Rng + ?Sized>(
    rng: &mut R,
    bandwidth: usize,
    channels: usize,
    decay: f64,
) -> (SphericalSignal, S2Spectrum) {
    let mut spec = S2Spectrum::zeros(channels, bandwidth);
    for c in 0..channels {
        for l in 0..bandwidth {
            let sigma = (1.0 + l as f64).powf(-decay);
            let re: f64 = StandardNormal.sample(rng);
            spec.set(c, l, 0, Complex64::new(sigma * re, 0.0));
            for m in 1..=(l as i64) {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                let z = Complex64::new(sigma * re, sigma * im);
                spec.set(c, l, m, z);
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                spec.set(c, l, -m, sign * z.conj());
            }
        }
    }
    let plan = HarmonicPlan::get(bandwidth);
    (plan.s2_synthesize(&spec), spec)
}

/// Rotation-group analogue of [`random_bandlimited_s2`]: the symmetry is
/// `H^l_{-m,-n} = (-1)^{m-n} conj(H^l_{m,n})`.
pub fn random_bandlimited_so3<R: Rng + ?Sized>(
    rng: &mut R,
    bandwidth: usize,
    channels: usize,
    decay: f64,
) -> (So3Signal, So3Spectrum) {
    let mut spec = So3Spectrum::zeros(channels, bandwidth);
    for c in 0..channels {
        for l in 0..bandwidth {
            let sigma = (1.0 + l as f64).powf(-decay);
            for m in -(l as i64)..=(l as i64) {
                for n in -(l as i64)..=(l as i64) {
                    // Fill each conjugate pair once, keyed by its first member.
                    if m > 0 || (m == 0 && n > 0) {
                        continue;
                    }
                    if m == 0 && n == 0 {
                        let re: f64 = StandardNormal.sample(rng);
                        spec.set(c, l, 0, 0, Complex64::new(sigma * re, 0.0));
                        continue;
                    }
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    let z = Complex64::new(sigma * re, sigma * im);
                    spec.set(c, l, m, n, z);
                    let sign = if (m - n).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    spec.set(c, l, -m, -n, sign * z.conj());
                }
            }
        }
    }
    let plan = HarmonicPlan::get(bandwidth);
    (plan.so3_synthesize(&spec), spec)
}

/// Evaluates a band-limited sphere channel at an arbitrary direction given by
/// angles `(alpha, beta)`; used by correlation code paths that leave the grid.
pub fn eval_s2_at(spectrum: &S2Spectrum, c: usize, alpha: f64, beta: f64) -> f64 {
    let w = wigner::wigner_series(spectrum.bandwidth, beta);
    let mut acc = Complex64::ZERO;
    for l in 0..spectrum.bandwidth {
        let scale = (2.0 * l as f64 + 1.0).sqrt();
        for m in -(l as i64)..=(l as i64) {
            let phase = Complex64::new(0.0, -(m as f64) * alpha).exp();
            acc += scale * spectrum.get(c, l, m) * w.get(l, m, 0) * phase;
        }
    }
    acc.re
}

/// Evaluates a band-limited rotation-group channel at an arbitrary rotation.
pub fn eval_so3_at(
    spectrum: &So3Spectrum,
    c: usize,
    r: &crate::geom::RotationZYZ,
) -> f64 {
    let w = wigner::wigner_series(spectrum.bandwidth, r.beta);
    let mut acc = Complex64::ZERO;
    for l in 0..spectrum.bandwidth {
        let scale = (2.0 * l as f64 + 1.0).sqrt();
        for m in -(l as i64)..=(l as i64) {
            let pa = Complex64::new(0.0, -(m as f64) * r.alpha).exp();
            for n in -(l as i64)..=(l as i64) {
                let pg = Complex64::new(0.0, -(n as f64) * r.gamma).exp();
                acc += scale * spectrum.get(c, l, m, n) * w.get(l, m, n) * pa * pg;
            }
        }
    }
    acc.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RotationZYZ;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const ROUNDTRIP_EPS: f64 = 1e-10;

    #[test]
    fn s2_roundtrip_recovers_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &b in &[1usize, 2, 3, 4, 8] {
            let (signal, spec) = random_bandlimited_s2(&mut rng, b, 2, 0.5);
            let plan = HarmonicPlan::get(b);
            let back = plan.s2_analyze(&signal);
            for (a, e) in back.data.iter().zip(spec.data.iter()) {
                assert!(
                    (a - e).norm() < ROUNDTRIP_EPS,
                    "b={b}: {a} vs {e}"
                );
            }
        }
    }

    #[test]
    fn so3_roundtrip_recovers_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for &b in &[1usize, 2, 3, 4] {
            let (signal, spec) = random_bandlimited_so3(&mut rng, b, 2, 0.5);
            let plan = HarmonicPlan::get(b);
            let back = plan.so3_analyze(&signal);
            for (a, e) in back.data.iter().zip(spec.data.iter()) {
                assert!((a - e).norm() < ROUNDTRIP_EPS, "b={b}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn grid_roundtrip_fixes_bandlimited_signals() {
        // synthesize(analyze(f)) = f when f is band-limited.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let b = 6;
        let (signal, _) = random_bandlimited_s2(&mut rng, b, 1, 0.3);
        let plan = HarmonicPlan::get(b);
        let back = plan.s2_synthesize(&plan.s2_analyze(&signal));
        for (a, e) in back.values.iter().zip(signal.values.iter()) {
            assert!((a - e).abs() < ROUNDTRIP_EPS);
        }
        let (hsig, _) = random_bandlimited_so3(&mut rng, 3, 1, 0.3);
        let hplan = HarmonicPlan::get(3);
        let hback = hplan.so3_synthesize(&hplan.so3_analyze(&hsig));
        for (a, e) in hback.values.iter().zip(hsig.values.iter()) {
            assert!((a - e).abs() < ROUNDTRIP_EPS);
        }
    }

    #[test]
    fn parseval_energy_identity() {
        // Orthonormal basis + exact quadrature: grid energy equals
        // coefficient energy for band-limited signals.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let b = 5;
        let (signal, spec) = random_bandlimited_s2(&mut rng, b, 3, 0.4);
        let plan = HarmonicPlan::get(b);
        for c in 0..3 {
            let mut grid_e = 0.0;
            for j in 0..2 * b {
                for k in 0..2 * b {
                    grid_e += plan.sphere.row_weight[k] * signal.values[[c, j, k]].powi(2);
                }
            }
            let coef_e: f64 = spec.channel(c).iter().map(|z| z.norm_sqr()).sum();
            assert!(
                (grid_e - coef_e).abs() < 1e-9 * coef_e.max(1.0),
                "channel {c}: {grid_e} vs {coef_e}"
            );
        }
        let (hsig, hspec) = random_bandlimited_so3(&mut rng, 4, 2, 0.4);
        let hplan = HarmonicPlan::get(4);
        for c in 0..2 {
            let mut grid_e = 0.0;
            for j in 0..8 {
                for k in 0..8 {
                    for g in 0..8 {
                        grid_e += hplan.so3.row_weight[k] * hsig.values[[c, j, k, g]].powi(2);
                    }
                }
            }
            let coef_e: f64 = hspec.channel(c).iter().map(|z| z.norm_sqr()).sum();
            assert!(
                (grid_e - coef_e).abs() < 1e-9 * coef_e.max(1.0),
                "channel {c}: {grid_e} vs {coef_e}"
            );
        }
    }

    #[test]
    fn constant_signal_has_only_degree_zero() {
        let b = 4;
        let mut signal = SphericalSignal::zeros(1, b);
        signal.values.fill(2.5);
        let plan = HarmonicPlan::get(b);
        let spec = plan.s2_analyze(&signal);
        // Basis function for l = 0 is the constant 1 under the normalized
        // measure, so the coefficient is the mean value itself.
        assert!((spec.get(0, 0, 0) - Complex64::new(2.5, 0.0)).norm() < 1e-12);
        for l in 1..b {
            for m in -(l as i64)..=(l as i64) {
                assert!(spec.get(0, l, m).norm() < 1e-12, "l={l} m={m}");
            }
        }
    }

    #[test]
    fn analysis_matches_pointwise_basis_inner_product() {
        // Cross-check the staged transform against a direct O(n^2 b^2)
        // inner-product evaluation with explicitly constructed basis values.
        let b = 3;
        let n = 2 * b;
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let (signal, _) = random_bandlimited_s2(&mut rng, b, 1, 0.0);
        let plan = HarmonicPlan::get(b);
        let spec = plan.s2_analyze(&signal);
        for l in 0..b {
            for m in -(l as i64)..=(l as i64) {
                let mut acc = Complex64::ZERO;
                for j in 0..n {
                    for k in 0..n {
                        let basis = (2.0 * l as f64 + 1.0).sqrt()
                            * plan.rows[k].get(l, m, 0)
                            * Complex64::new(0.0, -(m as f64) * plan.sphere.alphas[j]).exp();
                        acc += plan.sphere.row_weight[k]
                            * signal.values[[0, j, k]]
                            * basis.conj();
                    }
                }
                assert!((acc - spec.get(0, l, m)).norm() < 1e-10, "l={l} m={m}");
            }
        }
    }

    #[test]
    fn synthesis_matches_pointwise_eval() {
        let b = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let (signal, spec) = random_bandlimited_s2(&mut rng, b, 1, 0.2);
        let plan = HarmonicPlan::get(b);
        for j in [0, 3, 5] {
            for k in [1, 4, 6] {
                let v = eval_s2_at(&spec, 0, plan.sphere.alphas[j], plan.sphere.betas[k]);
                assert!((v - signal.values[[0, j, k]]).abs() < 1e-10);
            }
        }
        let (hsig, hspec) = random_bandlimited_so3(&mut rng, 3, 1, 0.2);
        let hplan = HarmonicPlan::get(3);
        for (j, k, g) in [(0, 0, 0), (2, 3, 4), (5, 1, 2)] {
            let r = RotationZYZ::new(
                hplan.so3.alphas[j],
                hplan.so3.betas[k],
                hplan.so3.gammas[g],
            );
            let v = eval_so3_at(&hspec, 0, &r);
            assert!((v - hsig.values[[0, j, k, g]]).abs() < 1e-10);
        }
    }

    #[test]
    fn synthesis_across_bandwidths_truncates_and_pads() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (_, spec) = random_bandlimited_s2(&mut rng, 6, 1, 0.3);
        // Truncation: synthesizing on a narrower grid equals synthesizing the
        // truncated spectrum.
        let narrow = HarmonicPlan::get(4);
        let direct = narrow.s2_synthesize(&spec);
        let viatrunc = narrow.s2_synthesize(&spec.truncated(4));
        for (a, e) in direct.values.iter().zip(viatrunc.values.iter()) {
            assert!((a - e).abs() < 1e-12);
        }
        // Zero-padding: a wider grid sees the same band-limited function, so
        // analysis on the wide grid recovers the original coefficients.
        let wide = HarmonicPlan::get(9);
        let upsampled = wide.s2_synthesize(&spec);
        let wide_spec = wide.s2_analyze(&upsampled);
        for l in 0..9 {
            for m in -(l as i64)..=(l as i64) {
                let want = if l < 6 { spec.get(0, l, m) } else { Complex64::ZERO };
                assert!((wide_spec.get(0, l, m) - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn plan_cache_returns_shared_instances() {
        let a = HarmonicPlan::get(5);
        let b = HarmonicPlan::get(5);
        assert!(Arc::ptr_eq(&a, &b));
    }
}
