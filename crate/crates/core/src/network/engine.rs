//! Batched spectral machinery behind the encoder.
//!
//! The per-sample transforms in [`crate::harmonic`] are the reference
//! implementation; this module re-expresses them so that whole mini-batches
//! and whole filter banks move through dense real GEMMs. Both periodic-angle
//! Fourier stages become matrix products against twiddle matrices, and the
//! per-degree correlation products become one complex GEMM per degree with
//! channels folded into the matrix dimensions. The latitude stage (the only
//! non-separable one) stays a short explicit loop, since its work is a small
//! fraction of the total.
//!
//! Everything here is laid out so that reverse-mode differentiation needs no
//! new transforms: under the plain sum-of-products inner product on grids
//! and on coefficient planes, the adjoint of synthesis is analysis after
//! dividing by the cell quadrature weights, and the adjoint of analysis is
//! synthesis followed by multiplication with those weights.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{s, Array2, Array4, Array5, ArrayView4, ArrayView5, Ix4, Ix5};
use num_complex::Complex64;

use crate::harmonic::{HarmonicPlan, S2Spectrum, So3Spectrum};
use crate::network::linalg::{cgemm, cgemm_real_part, rcgemm, CMat, Op};
use crate::network::LayerKind;

/// Twiddle matrices for the length-`2b` angular Fourier stages.
/// `plus[g][t] = exp(+2 pi i g t / n)` (analysis direction),
/// `minus[t][j] = exp(-2 pi i t j / n)` (synthesis direction).
struct Twiddles {
    plus: CMat,
    minus: CMat,
}

static TWIDDLE_CACHE: OnceLock<Mutex<HashMap<usize, Arc<Twiddles>>>> = OnceLock::new();

fn twiddles(bandwidth: usize) -> Arc<Twiddles> {
    let cache = TWIDDLE_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(bandwidth)
        .or_insert_with(|| {
            let n = 2 * bandwidth;
            let mut plus = CMat::zeros(n, n);
            let mut minus = CMat::zeros(n, n);
            for a in 0..n {
                for b in 0..n {
                    let ang = std::f64::consts::TAU * ((a * b) % n) as f64 / n as f64;
                    plus.re[[a, b]] = ang.cos();
                    plus.im[[a, b]] = ang.sin();
                    minus.re[[a, b]] = ang.cos();
                    minus.im[[a, b]] = -ang.sin();
                }
            }
            Arc::new(Twiddles { plus, minus })
        })
        .clone()
}

/// Spectra of a mini-batch of multi-channel signals, stored per degree as
/// one complex matrix ready for GEMM.
///
/// For degree `l` with width `w = 2l + 1`, the block has `batch * w` rows
/// (row `s*w + (l+m)` is order `m` of sample `s`) and `channels * inner(l)`
/// columns, where `inner` is 1 on the sphere and `w` on the rotation group
/// (column `c*inner + (l+n)` is the second order index `n` of channel `c`).
#[derive(Debug, Clone)]
pub struct PackedSpectra {
    pub domain: LayerKind,
    pub bandwidth: usize,
    pub batch: usize,
    pub channels: usize,
    pub blocks: Vec<CMat>,
}

impl PackedSpectra {
    #[inline]
    pub fn inner(domain: LayerKind, l: usize) -> usize {
        match domain {
            LayerKind::Sphere => 1,
            LayerKind::Rotation => 2 * l + 1,
        }
    }

    pub fn zeros(domain: LayerKind, bandwidth: usize, batch: usize, channels: usize) -> Self {
        let blocks = (0..bandwidth)
            .map(|l| {
                let w = 2 * l + 1;
                CMat::zeros(batch * w, channels * Self::inner(domain, l))
            })
            .collect();
        PackedSpectra {
            domain,
            bandwidth,
            batch,
            channels,
            blocks,
        }
    }

    /// Extends to a larger bandwidth with zero blocks for the new degrees.
    pub fn zero_pad(&self, new_bandwidth: usize) -> PackedSpectra {
        assert!(new_bandwidth >= self.bandwidth);
        let mut out = PackedSpectra::zeros(self.domain, new_bandwidth, self.batch, self.channels);
        for l in 0..self.bandwidth {
            out.blocks[l] = self.blocks[l].clone();
        }
        out
    }

    /// Sum over blocks of the real-representation inner product.
    pub fn real_dot(&self, other: &PackedSpectra) -> f64 {
        assert_eq!(self.bandwidth, other.bandwidth);
        self.blocks
            .iter()
            .zip(other.blocks.iter())
            .map(|(a, b)| a.real_dot(b))
            .sum()
    }

    /// Per-sample sphere spectra (requires the sphere domain).
    pub fn to_s2_spectra(&self) -> Vec<S2Spectrum> {
        assert_eq!(self.domain, LayerKind::Sphere);
        (0..self.batch)
            .map(|sample| {
                let mut spec = S2Spectrum::zeros(self.channels, self.bandwidth);
                for l in 0..self.bandwidth {
                    let w = 2 * l + 1;
                    let block = &self.blocks[l];
                    for c in 0..self.channels {
                        for m in -(l as i64)..=(l as i64) {
                            let row = sample * w + (l as i64 + m) as usize;
                            spec.set(
                                c,
                                l,
                                m,
                                Complex64::new(block.re[[row, c]], block.im[[row, c]]),
                            );
                        }
                    }
                }
                spec
            })
            .collect()
    }

    pub fn from_s2_spectra(specs: &[S2Spectrum]) -> PackedSpectra {
        assert!(!specs.is_empty());
        let bandwidth = specs[0].bandwidth;
        let channels = specs[0].channels;
        let mut out = PackedSpectra::zeros(LayerKind::Sphere, bandwidth, specs.len(), channels);
        for (sample, spec) in specs.iter().enumerate() {
            assert_eq!(spec.bandwidth, bandwidth);
            assert_eq!(spec.channels, channels);
            for l in 0..bandwidth {
                let w = 2 * l + 1;
                for c in 0..channels {
                    for m in -(l as i64)..=(l as i64) {
                        let row = sample * w + (l as i64 + m) as usize;
                        let z = spec.get(c, l, m);
                        out.blocks[l].re[[row, c]] = z.re;
                        out.blocks[l].im[[row, c]] = z.im;
                    }
                }
            }
        }
        out
    }

    /// Per-sample rotation-group spectra (requires the rotation domain).
    pub fn to_so3_spectra(&self) -> Vec<So3Spectrum> {
        assert_eq!(self.domain, LayerKind::Rotation);
        (0..self.batch)
            .map(|sample| {
                let mut spec = So3Spectrum::zeros(self.channels, self.bandwidth);
                for l in 0..self.bandwidth {
                    let w = 2 * l + 1;
                    let block = &self.blocks[l];
                    for c in 0..self.channels {
                        for m in -(l as i64)..=(l as i64) {
                            let row = sample * w + (l as i64 + m) as usize;
                            for n in -(l as i64)..=(l as i64) {
                                let col = c * w + (l as i64 + n) as usize;
                                spec.set(
                                    c,
                                    l,
                                    m,
                                    n,
                                    Complex64::new(block.re[[row, col]], block.im[[row, col]]),
                                );
                            }
                        }
                    }
                }
                spec
            })
            .collect()
    }

    pub fn from_so3_spectra(specs: &[So3Spectrum]) -> PackedSpectra {
        assert!(!specs.is_empty());
        let bandwidth = specs[0].bandwidth;
        let channels = specs[0].channels;
        let mut out = PackedSpectra::zeros(LayerKind::Rotation, bandwidth, specs.len(), channels);
        for (sample, spec) in specs.iter().enumerate() {
            assert_eq!(spec.bandwidth, bandwidth);
            assert_eq!(spec.channels, channels);
            for l in 0..bandwidth {
                let w = 2 * l + 1;
                for c in 0..channels {
                    for m in -(l as i64)..=(l as i64) {
                        let row = sample * w + (l as i64 + m) as usize;
                        for n in -(l as i64)..=(l as i64) {
                            let col = c * w + (l as i64 + n) as usize;
                            let z = spec.get(c, l, m, n);
                            out.blocks[l].re[[row, col]] = z.re;
                            out.blocks[l].im[[row, col]] = z.im;
                        }
                    }
                }
            }
        }
        out
    }
}

/// Reinterprets a complex matrix as a 4-d array, permutes its axes, and
/// returns the standard-layout matrix whose trailing axis is the new last
/// axis.
fn permute4(m: &CMat, shape: (usize, usize, usize, usize), perm: [usize; 4]) -> CMat {
    let f = |a: &Array2<f64>| {
        let v = a.view().into_shape_with_order(shape).unwrap();
        let p = v.permuted_axes(perm);
        let std = p.as_standard_layout().into_owned();
        let last = std.shape()[3];
        let total = std.len();
        std.into_shape_with_order((total / last, last)).unwrap()
    };
    CMat {
        re: f(&m.re),
        im: f(&m.im),
    }
}

/// Forward sphere transform of a `(batch, channels, alpha, beta)` grid
/// stack.
pub fn s2_analyze_batch(grids: &ArrayView4<'_, f64>) -> PackedSpectra {
    let (bsz, ch, na, nb) = grids.dim();
    assert_eq!(na, nb, "square angular grid expected");
    let n = na;
    let b = n / 2;
    assert!(b >= 1 && n == 2 * b);
    let plan = HarmonicPlan::get(b);
    let tw = twiddles(b);
    let bc = bsz * ch;

    // Azimuth stage: rows (sample, channel, beta), columns become the
    // azimuth frequency bin.
    let permuted = grids
        .to_shape((bc, n, n))
        .unwrap()
        .permuted_axes([0, 2, 1])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((bc * n, n))
        .unwrap();
    let mut u = CMat::zeros(bc * n, n);
    rcgemm(&permuted.view(), &tw.plus, &mut u);

    // Latitude stage with quadrature weights and rotation kernels.
    let mut out = PackedSpectra::zeros(LayerKind::Sphere, b, bsz, ch);
    for l in 0..b {
        let w = 2 * l + 1;
        let scale = (2.0 * l as f64 + 1.0).sqrt();
        let block = &mut out.blocks[l];
        for (mi, m) in (-(l as i64)..=(l as i64)).enumerate() {
            let tm = m.rem_euclid(n as i64) as usize;
            for k in 0..n {
                let coef = scale * plan.sphere.row_weight[k] * plan.rows[k].get(l, m, 0);
                if coef == 0.0 {
                    continue;
                }
                for sample in 0..bsz {
                    for c in 0..ch {
                        let row = (sample * ch + c) * n + k;
                        block.re[[sample * w + mi, c]] += coef * u.re[[row, tm]];
                        block.im[[sample * w + mi, c]] += coef * u.im[[row, tm]];
                    }
                }
            }
        }
    }
    out
}

/// Inverse sphere transform onto the grid of the spectra's own bandwidth.
pub fn s2_synthesize_batch(spec: &PackedSpectra) -> Array4<f64> {
    assert_eq!(spec.domain, LayerKind::Sphere);
    let b = spec.bandwidth;
    let n = 2 * b;
    let (bsz, ch) = (spec.batch, spec.channels);
    let bc = bsz * ch;
    let plan = HarmonicPlan::get(b);
    let tw = twiddles(b);

    // Latitude stage: accumulate coefficient-times-kernel into rows
    // (sample, channel, beta) by azimuth frequency bin.
    let mut v = CMat::zeros(bc * n, n);
    for l in 0..b {
        let w = 2 * l + 1;
        let scale = (2.0 * l as f64 + 1.0).sqrt();
        let block = &spec.blocks[l];
        for (mi, m) in (-(l as i64)..=(l as i64)).enumerate() {
            let tm = m.rem_euclid(n as i64) as usize;
            for k in 0..n {
                let coef = scale * plan.rows[k].get(l, m, 0);
                if coef == 0.0 {
                    continue;
                }
                for sample in 0..bsz {
                    for c in 0..ch {
                        let row = (sample * ch + c) * n + k;
                        v.re[[row, tm]] += coef * block.re[[sample * w + mi, c]];
                        v.im[[row, tm]] += coef * block.im[[sample * w + mi, c]];
                    }
                }
            }
        }
    }

    // Azimuth stage; only the real part of the result is the signal.
    let mut flat = Array2::zeros((bc * n, n));
    cgemm_real_part(&v, &tw.minus, &mut flat);
    // Rows are (sample, channel, beta) with alpha as columns; swap back.
    let grids = flat
        .into_shape_with_order((bc, n, n))
        .unwrap()
        .permuted_axes([0, 2, 1])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((bsz, ch, n, n))
        .unwrap();
    grids
}

/// Forward rotation-group transform of a
/// `(batch, channels, alpha, beta, gamma)` grid stack.
pub fn so3_analyze_batch(grids: &ArrayView5<'_, f64>) -> PackedSpectra {
    let (bsz, ch, na, nb, ng) = grids.dim();
    assert!(na == nb && nb == ng, "cubic angular grid expected");
    let n = na;
    let b = n / 2;
    assert!(b >= 1 && n == 2 * b);
    let plan = HarmonicPlan::get(b);
    let tw = twiddles(b);
    let bc = bsz * ch;

    // Gamma stage: contiguous reshape, gamma is already the trailing axis.
    let flat = grids
        .to_shape((bc * n * n, n))
        .unwrap()
        .as_standard_layout()
        .into_owned();
    let mut s1 = CMat::zeros(bc * n * n, n);
    rcgemm(&flat.view(), &tw.plus, &mut s1);

    // Alpha stage: bring the alpha axis last, transform, leaving rows
    // (sample*channel, beta, gamma bin) with alpha bins as columns.
    let s1p = permute4(&s1, (bc, n, n, n), [0, 2, 3, 1]);
    let mut s2 = CMat::zeros(bc * n * n, n);
    cgemm(1.0, &s1p, Op::N, &tw.plus, Op::N, 0.0, &mut s2);

    // Latitude stage.
    let mut out = PackedSpectra::zeros(LayerKind::Rotation, b, bsz, ch);
    for l in 0..b {
        let w = 2 * l + 1;
        let scale = (2.0 * l as f64 + 1.0).sqrt();
        let block = &mut out.blocks[l];
        for (mi, m) in (-(l as i64)..=(l as i64)).enumerate() {
            let tm = m.rem_euclid(n as i64) as usize;
            for (ni, nn) in (-(l as i64)..=(l as i64)).enumerate() {
                let tn = nn.rem_euclid(n as i64) as usize;
                for k in 0..n {
                    let coef = scale * plan.so3.row_weight[k] * plan.rows[k].get(l, m, nn);
                    if coef == 0.0 {
                        continue;
                    }
                    for sample in 0..bsz {
                        for c in 0..ch {
                            let row = ((sample * ch + c) * n + k) * n + tn;
                            block.re[[sample * w + mi, c * w + ni]] += coef * s2.re[[row, tm]];
                            block.im[[sample * w + mi, c * w + ni]] += coef * s2.im[[row, tm]];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Inverse rotation-group transform onto the grid of the spectra's own
/// bandwidth.
pub fn so3_synthesize_batch(spec: &PackedSpectra) -> Array5<f64> {
    assert_eq!(spec.domain, LayerKind::Rotation);
    let b = spec.bandwidth;
    let n = 2 * b;
    let (bsz, ch) = (spec.batch, spec.channels);
    let bc = bsz * ch;
    let plan = HarmonicPlan::get(b);
    let tw = twiddles(b);

    // Latitude stage: scatter coefficients times kernels into rows
    // (sample*channel, beta, gamma bin) with alpha bins as columns.
    let mut v = CMat::zeros(bc * n * n, n);
    for l in 0..b {
        let w = 2 * l + 1;
        let scale = (2.0 * l as f64 + 1.0).sqrt();
        let block = &spec.blocks[l];
        for (mi, m) in (-(l as i64)..=(l as i64)).enumerate() {
            let tm = m.rem_euclid(n as i64) as usize;
            for (ni, nn) in (-(l as i64)..=(l as i64)).enumerate() {
                let tn = nn.rem_euclid(n as i64) as usize;
                for k in 0..n {
                    let coef = scale * plan.rows[k].get(l, m, nn);
                    if coef == 0.0 {
                        continue;
                    }
                    for sample in 0..bsz {
                        for c in 0..ch {
                            let row = ((sample * ch + c) * n + k) * n + tn;
                            v.re[[row, tm]] += coef * block.re[[sample * w + mi, c * w + ni]];
                            v.im[[row, tm]] += coef * block.im[[sample * w + mi, c * w + ni]];
                        }
                    }
                }
            }
        }
    }

    // Alpha stage, then reorder rows from (.., beta, gamma bin) x alpha to
    // (.., alpha, beta) x gamma bin.
    let mut t2 = CMat::zeros(bc * n * n, n);
    cgemm(1.0, &v, Op::N, &tw.minus, Op::N, 0.0, &mut t2);
    let t2p = permute4(&t2, (bc, n, n, n), [0, 3, 1, 2]);

    // Gamma stage; the real part is the signal.
    let mut flat = Array2::zeros((bc * n * n, n));
    cgemm_real_part(&t2p, &tw.minus, &mut flat);
    flat.into_shape_with_order((bsz, ch, n, n, n)).unwrap()
}

/// Adjoint of [`s2_synthesize_batch`] under plain sum-of-products inner
/// products: divide by the cell quadrature weights, then analyze. The
/// backward pass fuses this step into its layer kernels; the standalone
/// form exists so the adjoint identity stays testable on its own.
#[cfg_attr(not(test), allow(dead_code))]
pub fn s2_adjoint_synthesize(grid_cotangent: &ArrayView4<'_, f64>) -> PackedSpectra {
    let (_, _, _, nb) = grid_cotangent.dim();
    let b = nb / 2;
    let plan = HarmonicPlan::get(b);
    let mut scaled = grid_cotangent.to_owned();
    for k in 0..nb {
        let inv = 1.0 / plan.sphere.row_weight[k];
        scaled.slice_mut(s![.., .., .., k]).mapv_inplace(|x| x * inv);
    }
    s2_analyze_batch(&scaled.view())
}

/// Adjoint of [`s2_analyze_batch`]: synthesize, then multiply by the cell
/// quadrature weights.
pub fn s2_adjoint_analyze(spec_cotangent: &PackedSpectra) -> Array4<f64> {
    let mut grid = s2_synthesize_batch(spec_cotangent);
    let n = 2 * spec_cotangent.bandwidth;
    let plan = HarmonicPlan::get(spec_cotangent.bandwidth);
    for k in 0..n {
        let wgt = plan.sphere.row_weight[k];
        grid.slice_mut(s![.., .., .., k]).mapv_inplace(|x| x * wgt);
    }
    grid
}

/// Adjoint of [`so3_synthesize_batch`]: divide by cell weights, analyze.
pub fn so3_adjoint_synthesize(grid_cotangent: &ArrayView5<'_, f64>) -> PackedSpectra {
    let (_, _, _, nb, _) = grid_cotangent.dim();
    let b = nb / 2;
    let plan = HarmonicPlan::get(b);
    let mut scaled = grid_cotangent.to_owned();
    for k in 0..nb {
        let inv = 1.0 / plan.so3.row_weight[k];
        scaled
            .slice_mut(s![.., .., .., k, ..])
            .mapv_inplace(|x| x * inv);
    }
    so3_analyze_batch(&scaled.view())
}

/// Adjoint of [`so3_analyze_batch`]: synthesize, multiply by cell weights.
pub fn so3_adjoint_analyze(spec_cotangent: &PackedSpectra) -> Array5<f64> {
    let mut grid = so3_synthesize_batch(spec_cotangent);
    let n = 2 * spec_cotangent.bandwidth;
    let plan = HarmonicPlan::get(spec_cotangent.bandwidth);
    for k in 0..n {
        let wgt = plan.so3.row_weight[k];
        grid.slice_mut(s![.., .., .., k, ..]).mapv_inplace(|x| x * wgt);
    }
    grid
}

/// A filter bank analyzed and rearranged for the correlation GEMM.
///
/// For degree `l < out_bandwidth`, `blocks[l]` has entry
/// `[(ci*inner + k), (co*w + n)] = conj(Psi[co][ci]^l_{n,k}) / sqrt(2l+1)`,
/// so that `activations x block` accumulates the correlation spectrum over
/// input channels in one product.
#[derive(Debug, Clone)]
pub struct PackedFilter {
    pub in_domain: LayerKind,
    pub in_bandwidth: usize,
    pub out_bandwidth: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub blocks: Vec<CMat>,
}

/// Analyzes a grid-domain filter tensor (`(C_out, C_in, grid...)`) and packs
/// the degrees below `out_bandwidth` for the forward GEMM.
pub fn pack_filter(
    filters: &ndarray::ArrayD<f64>,
    kind: LayerKind,
    out_bandwidth: usize,
) -> PackedFilter {
    let spec = match kind {
        LayerKind::Sphere => {
            let v = filters.view().into_dimensionality::<Ix4>().unwrap();
            s2_analyze_batch(&v)
        }
        LayerKind::Rotation => {
            let v = filters.view().into_dimensionality::<Ix5>().unwrap();
            so3_analyze_batch(&v)
        }
    };
    assert!(out_bandwidth >= 1 && out_bandwidth <= spec.bandwidth);
    let blocks = (0..out_bandwidth)
        .map(|l| {
            let inv = 1.0 / (2.0 * l as f64 + 1.0).sqrt();
            let b = &spec.blocks[l];
            CMat {
                re: b.re.t().to_owned() * inv,
                im: b.im.t().to_owned() * -inv,
            }
        })
        .collect();
    PackedFilter {
        in_domain: kind,
        in_bandwidth: spec.bandwidth,
        out_bandwidth,
        in_channels: spec.channels,
        out_channels: spec.batch,
        blocks,
    }
}

/// Correlation in the spectral domain: per degree, one complex GEMM of the
/// activation block against the packed filter block. The result lives on the
/// rotation group at the filter's output bandwidth.
pub fn correlate_forward(act: &PackedSpectra, filt: &PackedFilter) -> PackedSpectra {
    assert_eq!(act.domain, filt.in_domain);
    assert_eq!(act.bandwidth, filt.in_bandwidth, "activation/filter bandwidth");
    assert_eq!(act.channels, filt.in_channels, "activation/filter channels");
    let mut out = PackedSpectra::zeros(
        LayerKind::Rotation,
        filt.out_bandwidth,
        act.batch,
        filt.out_channels,
    );
    for l in 0..filt.out_bandwidth {
        cgemm(
            1.0,
            &act.blocks[l],
            Op::N,
            &filt.blocks[l],
            Op::N,
            0.0,
            &mut out.blocks[l],
        );
    }
    out
}

/// Adjoint of [`correlate_forward`] in its activation argument. Degrees at
/// and above the output bandwidth receive zero cotangent.
pub fn correlate_backward_act(dout: &PackedSpectra, filt: &PackedFilter) -> PackedSpectra {
    assert_eq!(dout.bandwidth, filt.out_bandwidth);
    assert_eq!(dout.channels, filt.out_channels);
    let mut dact = PackedSpectra::zeros(
        filt.in_domain,
        filt.in_bandwidth,
        dout.batch,
        filt.in_channels,
    );
    for l in 0..filt.out_bandwidth {
        cgemm(
            1.0,
            &dout.blocks[l],
            Op::N,
            &filt.blocks[l],
            Op::H,
            0.0,
            &mut dact.blocks[l],
        );
    }
    dact
}

/// Adjoint of [`correlate_forward`] in its filter argument, returned in the
/// packed-filter block shape.
pub fn correlate_backward_filter(act: &PackedSpectra, dout: &PackedSpectra) -> Vec<CMat> {
    assert_eq!(act.batch, dout.batch);
    (0..dout.bandwidth)
        .map(|l| {
            let mut d = CMat::zeros(act.blocks[l].cols(), dout.blocks[l].cols());
            cgemm(
                1.0,
                &act.blocks[l],
                Op::H,
                &dout.blocks[l],
                Op::N,
                0.0,
                &mut d,
            );
            d
        })
        .collect()
}

/// Maps packed-filter-block cotangents back to a filter *spectrum*
/// cotangent (batch = output channels, channels = input channels), inverting
/// the conjugate-transpose-and-scale packing of [`pack_filter`].
pub fn filter_block_grad_to_spectra(
    dphi: &[CMat],
    kind: LayerKind,
    in_bandwidth: usize,
    in_channels: usize,
    out_channels: usize,
) -> PackedSpectra {
    let mut out = PackedSpectra::zeros(kind, in_bandwidth, out_channels, in_channels);
    for (l, d) in dphi.iter().enumerate() {
        let inv = 1.0 / (2.0 * l as f64 + 1.0).sqrt();
        out.blocks[l] = CMat {
            re: d.re.t().to_owned() * inv,
            im: d.im.t().to_owned() * -inv,
        };
    }
    out
}

/// Grid-domain filter gradient: adjoint of the on-the-fly filter analysis.
pub fn filter_grad_to_grid(spec_cotangent: &PackedSpectra) -> ndarray::ArrayD<f64> {
    match spec_cotangent.domain {
        LayerKind::Sphere => s2_adjoint_analyze(spec_cotangent).into_dyn(),
        LayerKind::Rotation => so3_adjoint_analyze(spec_cotangent).into_dyn(),
    }
}
