//! Reverse-mode differentiation through the decoder and the encoder.
//!
//! Every building block reuses the batched spectral engine: the grid/spectra
//! transforms are linear, so their cotangent maps are the measure-weighted
//! adjoints already exposed there, and the per-degree correlation products
//! differentiate into the same complex GEMMs with one operand conjugate
//! transposed. The dense decoder layers backpropagate with plain matrix
//! products. ReLU's derivative at exactly zero is taken to be zero.

use nalgebra::Vector3;
use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array3, Array5};

use crate::network::engine::{
    correlate_backward_act, correlate_backward_filter, filter_block_grad_to_spectra,
    filter_grad_to_grid, so3_adjoint_analyze, so3_adjoint_synthesize,
};
use crate::network::{
    decoder_forward_batch, DecoderTape, EncoderRuntime, EncoderTape, FoldGrid, ModelGradients,
    ModelWeights,
};
use crate::train::chamfer::chamfer_and_grad;
use crate::train::TrainError;

/// Backpropagates `dy` (gradient of the loss in the reconstructed
/// coordinates, shape `(batch, grid points, 3)`) through the four dense
/// layers. Accumulates parameter gradients into `grads.decoder` and returns
/// the gradient with respect to the descriptors, `(batch, descriptor len)`.
pub fn decoder_backward(
    dy: &Array3<f64>,
    tape: &DecoderTape,
    w: &ModelWeights,
    grads: &mut ModelGradients,
) -> Array2<f64> {
    let (bsz, m, _) = dy.dim();
    let dlen = w.config.descriptor_len();
    let dy_flat = dy
        .to_owned()
        .into_shape_with_order((bsz * m, 3))
        .expect("contiguous gradient");

    // Through the output tanh.
    let last = tape.pre.len() - 1;
    let mut dpre = dy_flat;
    dpre.zip_mut_with(&tape.pre[last], |g, &p| {
        let t = p.tanh();
        *g *= 1.0 - t * t;
    });

    for i in (0..tape.pre.len()).rev() {
        // Layer input: the concatenated descriptor/grid matrix for the first
        // layer, the rectified previous pre-activation otherwise.
        let h_prev = if i == 0 {
            tape.input.clone()
        } else {
            tape.pre[i - 1].mapv(|v| v.max(0.0))
        };
        general_mat_mul(1.0, &h_prev.t(), &dpre, 1.0, &mut grads.decoder[i].weight);
        for (c, col) in dpre.columns().into_iter().enumerate() {
            grads.decoder[i].bias[c] += col.sum();
        }
        let mut dh = Array2::zeros(h_prev.raw_dim());
        general_mat_mul(1.0, &dpre, &w.decoder[i].weight.t(), 0.0, &mut dh);
        if i == 0 {
            // Sum the descriptor portion of the input gradient over the grid
            // points of each sample; the two planar coordinates are fixed.
            let mut ddesc = Array2::zeros((bsz, dlen));
            for smp in 0..bsz {
                for p in 0..m {
                    for c in 0..dlen {
                        ddesc[[smp, c]] += dh[[smp * m + p, c]];
                    }
                }
            }
            return ddesc;
        }
        dpre = dh;
        dpre.zip_mut_with(&tape.pre[i - 1], |g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
    }
    unreachable!("decoder has at least one layer");
}

/// Backpropagates a descriptor cotangent through the correlation stack,
/// accumulating filter and bias gradients into `grads.encoder`.
pub fn encoder_backward(
    ddesc: &Array2<f64>,
    tape: &EncoderTape,
    rt: &EncoderRuntime<'_>,
    grads: &mut ModelGradients,
) {
    let cfg = &rt.weights.config;
    let nlayers = cfg.layers.len();
    let nf = 2 * cfg.descriptor_bandwidth();
    let bsz = ddesc.nrows();

    // The descriptor is the flattened single-channel final map.
    let mut dout: Array5<f64> = ddesc
        .to_owned()
        .into_shape_with_order((bsz, 1, nf, nf, nf))
        .expect("contiguous descriptor gradient");

    for i in (0..nlayers).rev() {
        let spec = &cfg.layers[i];
        let tl = &tape.layers[i];

        // All layers but the last apply ReLU after the bias.
        let mut dpre = dout;
        if i != nlayers - 1 {
            dpre.zip_mut_with(&tl.preact, |g, &p| {
                if p <= 0.0 {
                    *g = 0.0;
                }
            });
        }

        // Bias enters as a per-channel constant over all cells and samples.
        for c in 0..spec.out_channels {
            grads.encoder[i].bias[c] += dpre.slice(s![.., c, .., .., ..]).sum();
        }

        // Into the spectral domain of the correlation product.
        let dprod = so3_adjoint_synthesize(&dpre.view());

        // Filter gradient: correlation of the saved input spectra with the
        // product cotangent, unpacked back to the grid parameterization.
        let dblocks = correlate_backward_filter(&tl.input_spectra, &dprod);
        let dspec = filter_block_grad_to_spectra(
            &dblocks,
            spec.kind,
            spec.in_bandwidth,
            spec.in_channels,
            spec.out_channels,
        );
        let dgrid = filter_grad_to_grid(&dspec);
        grads.encoder[i]
            .filters
            .zip_mut_with(&dgrid, |a, &b| *a += b);

        if i > 0 {
            // Input gradient, handed to the previous layer as its output
            // cotangent. The first layer's input is data, not a parameter.
            let dact = correlate_backward_act(&dprod, &rt.packed[i]);
            dout = so3_adjoint_analyze(&dact);
        } else {
            dout = dpre; // keeps the loop variable alive; value unused
        }
    }
}

/// Full pipeline evaluation: mean symmetric nearest-neighbor loss of the
/// reconstructions against per-sample targets, optionally with gradients
/// for every parameter.
///
/// `inputs` is the stacked signal batch `(batch, shells, 2b, 2b)`; `targets`
/// holds one support-normalized point set per sample.
pub fn loss_and_gradients(
    weights: &ModelWeights,
    inputs: &ndarray::Array4<f64>,
    targets: &[Vec<Vector3<f64>>],
    grid: &FoldGrid,
    want_gradients: bool,
) -> Result<(f64, Option<ModelGradients>), TrainError> {
    let bsz = inputs.dim().0;
    if targets.len() != bsz {
        return Err(TrainError::InvalidConfig(format!(
            "batch has {bsz} samples but {} target sets",
            targets.len()
        )));
    }
    let rt = EncoderRuntime::new(weights)?;
    let enc = rt.forward_batch(inputs, want_gradients)?;
    let (recon, dtape) =
        decoder_forward_batch(&enc.descriptors, grid, weights, want_gradients)?;

    let m = grid.len();
    let inv_b = 1.0 / bsz as f64;
    let mut loss = 0.0;
    let mut drecon = want_gradients.then(|| Array3::<f64>::zeros((bsz, m, 3)));
    for (smp, target) in targets.iter().enumerate() {
        let view = recon.slice(s![smp, .., ..]);
        let (l, g) = chamfer_and_grad(&view, target)?;
        loss += inv_b * l;
        if let Some(dr) = drecon.as_mut() {
            dr.slice_mut(s![smp, .., ..]).assign(&(g * inv_b));
        }
    }
    if !want_gradients {
        return Ok((loss, None));
    }

    let mut grads = ModelGradients::zeros_like(weights);
    let ddesc = decoder_backward(
        &drecon.unwrap(),
        dtape.as_ref().expect("decoder tape recorded"),
        weights,
        &mut grads,
    );
    encoder_backward(
        &ddesc,
        enc.tape.as_ref().expect("encoder tape recorded"),
        &rt,
        &mut grads,
    );
    Ok((loss, Some(grads)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_weights, NetworkConfig};
    use crate::signal::{build_spherical_signal, SupportSpec};
    use crate::geom::PointCloud;
    use ndarray::Array4;
    use rand::{Rng, RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ball_points(rng: &mut impl Rng, n: usize, radius: f64) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let v = Vector3::new(
                rng.random_range(-radius..radius),
                rng.random_range(-radius..radius),
                rng.random_range(-radius..radius),
            );
            if v.norm() <= radius {
                out.push(v);
            }
        }
        out
    }

    fn tiny_batch(
        seed: u64,
        npts: usize,
    ) -> (NetworkConfig, Array4<f64>, Vec<Vec<Vector3<f64>>>, FoldGrid) {
        let cfg = NetworkConfig::tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radius = cfg.support_radius;
        let pts = ball_points(&mut rng, npts, radius);
        let spec = SupportSpec::new(radius, cfg.input_shells, cfg.layers[0].in_bandwidth).unwrap();
        let sig = build_spherical_signal(&PointCloud::new(pts.clone()), &Vector3::zeros(), &spec);
        let n = 2 * cfg.layers[0].in_bandwidth;
        let mut input = Array4::zeros((1, cfg.input_shells, n, n));
        input.slice_mut(s![0, .., .., ..]).assign(&sig.values);
        let targets = vec![pts.iter().map(|p| p / radius).collect()];
        let grid = FoldGrid::regular(cfg.fold_side);
        (cfg, input, targets, grid)
    }

    fn perturbed(w: &ModelWeights, idx: usize, delta: f64) -> ModelWeights {
        let mut out = w.clone();
        let mut i = 0usize;
        out.visit_params_mut(|v| {
            if i == idx {
                *v += delta;
            }
            i += 1;
        });
        out
    }

    /// Moves the model to a generic point: with all-zero biases, rows whose
    /// ReLU inputs are fully clipped make later pre-activations *exactly*
    /// zero, parking the function on a kink where central differences and
    /// the pinned one-sided derivative legitimately disagree. Random biases
    /// restore differentiability almost surely.
    fn genericize(w: &mut ModelWeights, rng: &mut impl Rng) {
        for l in &mut w.encoder {
            l.bias.mapv_inplace(|b| b + rng.random_range(-0.2..0.2f64));
        }
        for l in &mut w.decoder {
            l.bias.mapv_inplace(|b| b + rng.random_range(-0.2..0.2f64));
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradients() {
        let (cfg, input, targets, grid) = tiny_batch(31, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let w = init_weights(&cfg, &mut rng).unwrap();
        let rt = EncoderRuntime::new(&w).unwrap();
        let enc = rt.forward_batch(&input, true).unwrap();
        let (_, dtape) = decoder_forward_batch(&enc.descriptors, &grid, &w, true).unwrap();

        let mut grads = ModelGradients::zeros_like(&w);
        let dy = Array3::zeros((1, grid.len(), 3));
        let ddesc = decoder_backward(&dy, dtape.as_ref().unwrap(), &w, &mut grads);
        assert!(ddesc.iter().all(|&v| v == 0.0));
        encoder_backward(&ddesc, enc.tape.as_ref().unwrap(), &rt, &mut grads);
        let mut all = Vec::new();
        grads.visit_params(|v| all.push(v));
        assert!(all.iter().all(|&v| v == 0.0));
        drop(targets);
    }

    #[test]
    fn decoder_gradients_match_finite_differences_on_linear_probe() {
        // Probe loss: fixed random linear functional of the reconstruction,
        // so the upstream gradient is exactly the coefficient tensor.
        let (cfg, input, _targets, grid) = tiny_batch(33, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let mut w = init_weights(&cfg, &mut rng).unwrap();
        genericize(&mut w, &mut rng);
        let rt = EncoderRuntime::new(&w).unwrap();
        let enc = rt.forward_batch(&input, false).unwrap();

        let m = grid.len();
        let mut coeff = Array3::zeros((1, m, 3));
        for v in coeff.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let probe = |w: &ModelWeights| -> f64 {
            let (y, _) = decoder_forward_batch(&enc.descriptors, &grid, w, false).unwrap();
            (&y * &coeff).sum()
        };

        let (_, dtape) = decoder_forward_batch(&enc.descriptors, &grid, &w, true).unwrap();
        let mut grads = ModelGradients::zeros_like(&w);
        decoder_backward(&coeff, dtape.as_ref().unwrap(), &w, &mut grads);
        let mut flat = Vec::new();
        grads.visit_params(|v| flat.push(v));

        // Decoder parameters sit after the encoder block in canonical order.
        let mut enc_params = 0usize;
        for l in &w.encoder {
            enc_params += l.filters.len() + l.bias.len();
        }
        let total = w.param_count();
        let h = 1e-5;
        for k in 0..45 {
            let idx = enc_params + (k * 131) % (total - enc_params);
            let fd = (probe(&perturbed(&w, idx, h)) - probe(&perturbed(&w, idx, -h))) / (2.0 * h);
            let a = flat[idx];
            let denom = a.abs().max(fd.abs());
            if denom > 1e-6 {
                assert!(
                    (a - fd).abs() / denom < 1e-4,
                    "decoder param {idx}: analytic {a} vs fd {fd}"
                );
            } else {
                assert!((a - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn encoder_gradients_match_finite_differences_on_linear_probe() {
        let (cfg, input, _targets, _grid) = tiny_batch(35, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let mut w = init_weights(&cfg, &mut rng).unwrap();
        genericize(&mut w, &mut rng);
        let dlen = cfg.descriptor_len();
        let mut coeff = Array2::zeros((1, dlen));
        for v in coeff.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let probe = |w: &ModelWeights| -> f64 {
            let rt = EncoderRuntime::new(w).unwrap();
            let enc = rt.forward_batch(&input, false).unwrap();
            (&enc.descriptors * &coeff).sum()
        };

        let rt = EncoderRuntime::new(&w).unwrap();
        let enc = rt.forward_batch(&input, true).unwrap();
        let mut grads = ModelGradients::zeros_like(&w);
        encoder_backward(&coeff, enc.tape.as_ref().unwrap(), &rt, &mut grads);
        let mut flat = Vec::new();
        grads.visit_params(|v| flat.push(v));

        let mut enc_params = 0usize;
        for l in &w.encoder {
            enc_params += l.filters.len() + l.bias.len();
        }
        let h = 1e-5;
        for k in 0..45 {
            let idx = (k * 37) % enc_params;
            let fd = (probe(&perturbed(&w, idx, h)) - probe(&perturbed(&w, idx, -h))) / (2.0 * h);
            let a = flat[idx];
            let denom = a.abs().max(fd.abs());
            if denom > 1e-6 {
                assert!(
                    (a - fd).abs() / denom < 1e-4,
                    "encoder param {idx}: analytic {a} vs fd {fd}"
                );
            } else {
                assert!((a - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn full_loss_gradients_match_finite_differences() {
        // End-to-end check against central differences on a 20-point
        // neighborhood, h = 1e-4, over 50+ randomly chosen parameters.
        let (cfg, input, targets, grid) = tiny_batch(37, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let mut w = init_weights(&cfg, &mut rng).unwrap();
        genericize(&mut w, &mut rng);

        let (_, grads) = loss_and_gradients(&w, &input, &targets, &grid, true).unwrap();
        let mut flat = Vec::new();
        grads.unwrap().visit_params(|v| flat.push(v));

        let total = w.param_count();
        let mut picks: Vec<usize> = Vec::new();
        while picks.len() < 52 {
            let idx = rng.random_range(0..total);
            if !picks.contains(&idx) {
                picks.push(idx);
            }
        }
        let h = 1e-4;
        for &idx in &picks {
            let lp = loss_and_gradients(&perturbed(&w, idx, h), &input, &targets, &grid, false)
                .unwrap()
                .0;
            let lm = loss_and_gradients(&perturbed(&w, idx, -h), &input, &targets, &grid, false)
                .unwrap()
                .0;
            let fd = (lp - lm) / (2.0 * h);
            let a = flat[idx];
            let denom = a.abs().max(fd.abs());
            if denom > 1e-6 {
                assert!(
                    (a - fd).abs() / denom < 1e-3,
                    "param {idx}: analytic {a} vs fd {fd}"
                );
            } else {
                assert!((a - fd).abs() < 1e-6, "param {idx}: analytic {a} vs fd {fd}");
            }
        }
    }
}
