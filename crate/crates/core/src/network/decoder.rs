//! Folding decoder: deform a planar grid of samples into a surface patch.
//!
//! Every grid point's two coordinates are concatenated onto the descriptor
//! and pushed through four fully connected layers — ReLU after the first
//! three, tanh on the last — so the output coordinates live in the cube
//! `[-1, 1]^3`, i.e. in units of the support radius.

use nalgebra::Vector3;
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Array3};

use crate::geom::PointCloud;
use crate::network::{Descriptor, FoldGrid, ModelWeights, NetworkError};

/// Saved state of a recorded decoder pass: the input matrix and the
/// pre-activation of every layer.
pub struct DecoderTape {
    /// `(batch * grid points, descriptor length + 2)`.
    pub input: Array2<f64>,
    /// Post-affine, pre-nonlinearity values per layer.
    pub pre: Vec<Array2<f64>>,
}

fn validate(
    descriptors: &Array2<f64>,
    w: &ModelWeights,
) -> Result<(), NetworkError> {
    let d = w.config.descriptor_len();
    if descriptors.ncols() != d {
        return Err(NetworkError::ShapeMismatch(format!(
            "descriptor length: expected {d}, got {}",
            descriptors.ncols()
        )));
    }
    for (i, (layer, (din, dout))) in w
        .decoder
        .iter()
        .zip(w.config.decoder_dims().into_iter())
        .enumerate()
    {
        if layer.weight.dim() != (din, dout) || layer.bias.len() != dout {
            return Err(NetworkError::ShapeMismatch(format!(
                "decoder layer {i}: expected {din}x{dout}, got {:?}",
                layer.weight.dim()
            )));
        }
    }
    Ok(())
}

/// Batched decoder pass: one row of `descriptors` per sample, every sample
/// folded over the same grid. Returns `(batch, grid points, 3)` coordinates
/// in `[-1, 1]`.
pub fn decoder_forward_batch(
    descriptors: &Array2<f64>,
    grid: &FoldGrid,
    w: &ModelWeights,
    record: bool,
) -> Result<(Array3<f64>, Option<DecoderTape>), NetworkError> {
    validate(descriptors, w)?;
    if grid.is_empty() {
        return Err(NetworkError::ShapeMismatch("empty fold grid".into()));
    }
    let bsz = descriptors.nrows();
    let m = grid.len();
    let d = descriptors.ncols();

    let mut x = Array2::zeros((bsz * m, d + 2));
    for s in 0..bsz {
        for (p, ab) in grid.samples.iter().enumerate() {
            let row = s * m + p;
            for j in 0..d {
                x[[row, j]] = descriptors[[s, j]];
            }
            x[[row, d]] = ab[0];
            x[[row, d + 1]] = ab[1];
        }
    }

    let mut pres = Vec::with_capacity(4);
    let mut h = x.clone();
    for (i, layer) in w.decoder.iter().enumerate() {
        let mut pre = Array2::zeros((h.nrows(), layer.weight.ncols()));
        general_mat_mul(1.0, &h, &layer.weight, 0.0, &mut pre);
        for mut row in pre.rows_mut() {
            row += &layer.bias;
        }
        if record {
            pres.push(pre.clone());
        }
        let last = i == 3;
        if last {
            pre.mapv_inplace(f64::tanh);
        } else {
            pre.mapv_inplace(|v| v.max(0.0));
        }
        h = pre;
    }

    let out = h
        .into_shape_with_order((bsz, m, 3))
        .map_err(|e| NetworkError::ShapeMismatch(format!("decoder output reshape: {e}")))?;
    let tape = record.then_some(DecoderTape { input: x, pre: pres });
    Ok((out, tape))
}

/// Folds one descriptor into a reconstructed patch in support-radius units.
pub fn decoder_forward(
    d: &Descriptor,
    grid: &FoldGrid,
    w: &ModelWeights,
) -> Result<PointCloud, NetworkError> {
    let mut descriptors = Array2::zeros((1, d.values.len()));
    for (j, &v) in d.values.iter().enumerate() {
        descriptors[[0, j]] = v;
    }
    let (out, _) = decoder_forward_batch(&descriptors, grid, w, false)?;
    let points = (0..grid.len())
        .map(|p| Vector3::new(out[[0, p, 0]], out[[0, p, 1]], out[[0, p, 2]]))
        .collect();
    Ok(PointCloud::new(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_weights, NetworkConfig};
    use rand::{Rng, RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_descriptor(rng: &mut impl Rng, cfg: &NetworkConfig) -> Descriptor {
        Descriptor {
            bandwidth: cfg.descriptor_bandwidth(),
            values: (0..cfg.descriptor_len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        }
    }

    #[test]
    fn zero_weights_replicate_tanh_of_final_bias() {
        let cfg = NetworkConfig::desk_scale();
        let mut w = ModelWeights::zeros(&cfg).unwrap();
        w.decoder[3].bias[0] = 0.3;
        w.decoder[3].bias[1] = -0.7;
        let grid = FoldGrid::regular(16);
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let d = random_descriptor(&mut rng, &cfg);
        let cloud = decoder_forward(&d, &grid, &w).unwrap();
        assert_eq!(cloud.points.len(), 256);
        let expect = Vector3::new(0.3f64.tanh(), (-0.7f64).tanh(), 0.0);
        for p in &cloud.points {
            assert!((p - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn outputs_stay_inside_unit_cube_and_depend_on_descriptor() {
        let cfg = NetworkConfig::tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let w = init_weights(&cfg, &mut rng).unwrap();
        let grid = FoldGrid::regular(cfg.fold_side);
        let d1 = random_descriptor(&mut rng, &cfg);
        let d2 = random_descriptor(&mut rng, &cfg);
        let c1 = decoder_forward(&d1, &grid, &w).unwrap();
        let c2 = decoder_forward(&d2, &grid, &w).unwrap();
        assert_eq!(c1.points.len(), cfg.fold_points());
        for p in c1.points.iter().chain(c2.points.iter()) {
            for i in 0..3 {
                assert!(p[i] >= -1.0 && p[i] <= 1.0);
            }
        }
        let diff: f64 = c1
            .points
            .iter()
            .zip(c2.points.iter())
            .map(|(a, b)| (a - b).norm())
            .sum();
        assert!(diff > 1e-9, "distinct descriptors must fold differently");
    }

    #[test]
    fn batched_and_single_paths_agree() {
        let cfg = NetworkConfig::tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let w = init_weights(&cfg, &mut rng).unwrap();
        let grid = FoldGrid::regular(3);
        let d1 = random_descriptor(&mut rng, &cfg);
        let d2 = random_descriptor(&mut rng, &cfg);
        let mut batch = Array2::zeros((2, cfg.descriptor_len()));
        for (j, &v) in d1.values.iter().enumerate() {
            batch[[0, j]] = v;
        }
        for (j, &v) in d2.values.iter().enumerate() {
            batch[[1, j]] = v;
        }
        let (out, tape) = decoder_forward_batch(&batch, &grid, &w, true).unwrap();
        let t = tape.unwrap();
        assert_eq!(t.pre.len(), 4);
        assert_eq!(t.input.dim(), (2 * 9, cfg.descriptor_len() + 2));
        for (s, d) in [(0usize, &d1), (1usize, &d2)] {
            let single = decoder_forward(d, &grid, &w).unwrap();
            for (p, q) in single.points.iter().enumerate() {
                for i in 0..3 {
                    assert!((out[[s, p, i]] - q[i]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let cfg = NetworkConfig::tiny();
        let w = ModelWeights::zeros(&cfg).unwrap();
        let grid = FoldGrid::regular(2);
        let d = Descriptor {
            bandwidth: 1,
            values: vec![0.0; cfg.descriptor_len() + 1],
        };
        assert!(matches!(
            decoder_forward(&d, &grid, &w),
            Err(NetworkError::ShapeMismatch(_))
        ));
    }
}
