//! Encoder forward passes.
//!
//! [`EncoderRuntime`] packs the grid-domain filters into their spectral GEMM
//! form once and then pushes mini-batches of input signals through the layer
//! stack: analyze, correlate per degree, synthesize, add the per-channel
//! bias, apply ReLU (the final layer stays linear). With `record` enabled,
//! the per-layer input spectra and pre-activations are kept so the training
//! code can run the exact adjoint chain backwards.

use std::sync::Arc;

use ndarray::{s, Array2, Array4, Array5};

use crate::network::engine::{
    correlate_forward, pack_filter, s2_analyze_batch, so3_analyze_batch, so3_synthesize_batch,
    PackedFilter, PackedSpectra,
};
use crate::network::{Descriptor, LayerKind, ModelWeights, NetworkError};
use crate::signal::{So3Signal, SphericalSignal};

/// Number of samples pushed through one batched forward pass when a larger
/// collection of signals is described.
const DESCRIBE_CHUNK: usize = 8;

/// Saved state of one layer's forward pass, enough to run its adjoints.
pub struct LayerTape {
    /// Spectra of the layer input at the input bandwidth.
    pub input_spectra: PackedSpectra,
    /// Grid output after bias, before the nonlinearity.
    pub preact: Array5<f64>,
}

/// Saved state of a recorded batched forward pass.
pub struct EncoderTape {
    /// The raw input grid stack `(batch, shells, 2b, 2b)`.
    pub input: Array4<f64>,
    pub layers: Vec<LayerTape>,
}

/// Result of a batched forward pass.
pub struct EncoderBatch {
    /// Flattened final maps, one row per sample.
    pub descriptors: Array2<f64>,
    /// Post-activation feature maps per layer,
    /// `(batch, channels, 2b_out, 2b_out, 2b_out)`.
    pub maps: Vec<Array5<f64>>,
    pub tape: Option<EncoderTape>,
}

/// Weights bound to their spectral-domain packed form.
pub struct EncoderRuntime<'w> {
    pub weights: &'w ModelWeights,
    pub packed: Vec<Arc<PackedFilter>>,
}

impl<'w> EncoderRuntime<'w> {
    /// Validates weight shapes against the config and packs every filter
    /// bank for the correlation GEMMs.
    pub fn new(weights: &'w ModelWeights) -> Result<EncoderRuntime<'w>, NetworkError> {
        weights.config.validate()?;
        let cfg = &weights.config;
        if weights.encoder.len() != cfg.layers.len() {
            return Err(NetworkError::ShapeMismatch(format!(
                "expected {} encoder layers, got {}",
                cfg.layers.len(),
                weights.encoder.len()
            )));
        }
        if weights.decoder.len() != 4 {
            return Err(NetworkError::ShapeMismatch(format!(
                "expected 4 decoder layers, got {}",
                weights.decoder.len()
            )));
        }
        for (i, (layer, spec)) in weights.encoder.iter().zip(cfg.layers.iter()).enumerate() {
            if layer.filters.shape() != spec.filter_shape().as_slice() {
                return Err(NetworkError::ShapeMismatch(format!(
                    "encoder layer {i} filters: expected {:?}, got {:?}",
                    spec.filter_shape(),
                    layer.filters.shape()
                )));
            }
            if layer.bias.len() != spec.out_channels {
                return Err(NetworkError::ShapeMismatch(format!(
                    "encoder layer {i} bias: expected {}, got {}",
                    spec.out_channels,
                    layer.bias.len()
                )));
            }
        }
        for (i, (layer, (din, dout))) in weights
            .decoder
            .iter()
            .zip(cfg.decoder_dims().into_iter())
            .enumerate()
        {
            if layer.weight.dim() != (din, dout) || layer.bias.len() != dout {
                return Err(NetworkError::ShapeMismatch(format!(
                    "decoder layer {i}: expected {din}x{dout} (+bias {dout}), got {:?} (+bias {})",
                    layer.weight.dim(),
                    layer.bias.len()
                )));
            }
        }
        let packed = weights
            .encoder
            .iter()
            .zip(cfg.layers.iter())
            .map(|(layer, spec)| Arc::new(pack_filter(&layer.filters, spec.kind, spec.out_bandwidth)))
            .collect();
        Ok(EncoderRuntime { weights, packed })
    }

    /// Batched forward pass over an input grid stack
    /// `(batch, shells, 2b, 2b)`.
    pub fn forward_batch(
        &self,
        input: &Array4<f64>,
        record: bool,
    ) -> Result<EncoderBatch, NetworkError> {
        let cfg = &self.weights.config;
        let first = &cfg.layers[0];
        let n0 = 2 * first.in_bandwidth;
        let (bsz, ch, na, nb) = input.dim();
        if ch != first.in_channels || na != n0 || nb != n0 {
            return Err(NetworkError::ShapeMismatch(format!(
                "encoder input: expected (_, {}, {n0}, {n0}), got ({bsz}, {ch}, {na}, {nb})",
                first.in_channels
            )));
        }
        if bsz == 0 {
            return Err(NetworkError::ShapeMismatch("empty batch".into()));
        }

        let mut maps: Vec<Array5<f64>> = Vec::with_capacity(cfg.layers.len());
        let mut tape_layers: Vec<LayerTape> = Vec::new();
        let mut cur: Option<Array5<f64>> = None;

        for (i, spec) in cfg.layers.iter().enumerate() {
            let act = match spec.kind {
                LayerKind::Sphere => s2_analyze_batch(&input.view()),
                LayerKind::Rotation => {
                    so3_analyze_batch(&cur.as_ref().expect("rotation layer input").view())
                }
            };
            let prod = correlate_forward(&act, &self.packed[i]);
            let mut grid = so3_synthesize_batch(&prod);
            let bias = &self.weights.encoder[i].bias;
            for c in 0..spec.out_channels {
                let b = bias[c];
                grid.slice_mut(s![.., c, .., .., ..]).mapv_inplace(|x| x + b);
            }
            if record {
                tape_layers.push(LayerTape {
                    input_spectra: act,
                    preact: grid.clone(),
                });
            }
            let last = i + 1 == cfg.layers.len();
            if !last {
                grid.mapv_inplace(|x| x.max(0.0));
            }
            maps.push(grid.clone());
            cur = Some(grid);
        }

        let final_map = cur.unwrap();
        let d = cfg.descriptor_len();
        let descriptors = final_map
            .into_shape_with_order((bsz, d))
            .map_err(|e| NetworkError::ShapeMismatch(format!("descriptor flatten: {e}")))?;

        Ok(EncoderBatch {
            descriptors,
            maps,
            tape: if record {
                Some(EncoderTape {
                    input: input.clone(),
                    layers: tape_layers,
                })
            } else {
                None
            },
        })
    }

    /// Stacks per-sample signals into the batched grid layout.
    pub fn signals_to_batch(&self, signals: &[SphericalSignal]) -> Result<Array4<f64>, NetworkError> {
        let first = &self.weights.config.layers[0];
        let n = 2 * first.in_bandwidth;
        let mut out = Array4::zeros((signals.len(), first.in_channels, n, n));
        for (i, sig) in signals.iter().enumerate() {
            if sig.bandwidth != first.in_bandwidth || sig.channels() != first.in_channels {
                return Err(NetworkError::ShapeMismatch(format!(
                    "signal {i}: expected {} channels at bandwidth {}, got {} at {}",
                    first.in_channels,
                    first.in_bandwidth,
                    sig.channels(),
                    sig.bandwidth
                )));
            }
            out.slice_mut(s![i, .., .., ..]).assign(&sig.values);
        }
        Ok(out)
    }

    /// Descriptors for a collection of signals, processed in chunks.
    pub fn describe(&self, signals: &[SphericalSignal]) -> Result<Vec<Descriptor>, NetworkError> {
        let bf = self.weights.config.descriptor_bandwidth();
        let mut out = Vec::with_capacity(signals.len());
        for chunk in signals.chunks(DESCRIBE_CHUNK.max(1)) {
            let batch = self.signals_to_batch(chunk)?;
            let fwd = self.forward_batch(&batch, false)?;
            for row in fwd.descriptors.rows() {
                out.push(Descriptor {
                    bandwidth: bf,
                    values: row.to_vec(),
                });
            }
        }
        Ok(out)
    }
}

/// Full forward pass of one signal: returns the flattened final map and the
/// post-activation feature maps of every layer.
pub fn encoder_forward(
    signal: &SphericalSignal,
    weights: &ModelWeights,
) -> Result<(Descriptor, Vec<So3Signal>), NetworkError> {
    let rt = EncoderRuntime::new(weights)?;
    let batch = rt.signals_to_batch(std::slice::from_ref(signal))?;
    let fwd = rt.forward_batch(&batch, false)?;
    let cfg = &weights.config;
    let mut intermediates = Vec::with_capacity(cfg.layers.len());
    for (map, spec) in fwd.maps.iter().zip(cfg.layers.iter()) {
        let mut sig = So3Signal::zeros(spec.out_channels, spec.out_bandwidth);
        sig.values.assign(&map.slice(s![0, .., .., .., ..]));
        intermediates.push(sig);
    }
    let descriptor = Descriptor {
        bandwidth: cfg.descriptor_bandwidth(),
        values: fwd.descriptors.row(0).to_vec(),
    };
    Ok((descriptor, intermediates))
}
