//! The descriptor network: a stack of correlation layers on the sphere and
//! the rotation group (the encoder), and a folding decoder that deforms a
//! planar grid of samples into a reconstructed surface patch.
//!
//! The encoder consumes the multi-channel spherical density signal of
//! [`crate::signal`]. Its first layer correlates against learned filters on
//! the sphere, producing feature maps on the rotation group; the remaining
//! layers correlate on the rotation group itself. Each layer adds a
//! per-channel bias and applies a ReLU, except the last, which stays linear
//! so that negative evidence in the final map survives for orientation
//! analysis. There is no pooling: rotating the input permutes (for
//! grid-aligned rotations, exactly) the cells of every feature map, which is
//! the property the rest of the toolkit builds on.
//!
//! Filters are stored as grid-domain signals at their layer's input
//! bandwidth and transformed on the fly; [`engine`] carries the batched
//! spectral machinery shared by inference and training.

pub(crate) mod linalg;
pub(crate) mod engine;
mod checkpoint;
mod decoder;
mod encoder;

pub use checkpoint::{load_checkpoint, save_checkpoint, TrainStateBlob, FORMAT_TAG};
pub use decoder::{decoder_forward, decoder_forward_batch, DecoderTape};
pub use encoder::{encoder_forward, EncoderBatch, EncoderRuntime, EncoderTape};

use ndarray::{Array1, Array2, ArrayD};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::So3Signal;

/// Errors from network construction, forward passes, and checkpoint I/O.
#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("corrupt checkpoint manifest: {0}")]
    CorruptManifest(String),
    #[error("truncated checkpoint payload: need {expected} bytes, found {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("checkpoint I/O failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Which domain a correlation layer operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    /// Input lives on the sphere; output on the rotation group.
    Sphere,
    /// Input and output both live on the rotation group.
    Rotation,
}

/// Shape contract of one correlation layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_bandwidth: usize,
    pub out_bandwidth: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerSpec {
    /// Number of grid cells of one input-domain signal at the input
    /// bandwidth (the filter grid size per channel pair).
    pub fn filter_cells(&self) -> usize {
        let n = 2 * self.in_bandwidth;
        match self.kind {
            LayerKind::Sphere => n * n,
            LayerKind::Rotation => n * n * n,
        }
    }

    /// Full filter tensor shape.
    pub fn filter_shape(&self) -> Vec<usize> {
        let n = 2 * self.in_bandwidth;
        match self.kind {
            LayerKind::Sphere => vec![self.out_channels, self.in_channels, n, n],
            LayerKind::Rotation => vec![self.out_channels, self.in_channels, n, n, n],
        }
    }
}

/// Complete architecture description: encoder layer stack, decoder widths,
/// and the folding grid resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of radial shells in the input signal (= first-layer channels).
    pub input_shells: usize,
    /// Neighborhood radius in input units; decoder outputs are expressed in
    /// coordinates divided by this radius.
    pub support_radius: f64,
    pub layers: Vec<LayerSpec>,
    /// The folding grid is `fold_side x fold_side` over the unit square.
    pub fold_side: usize,
    /// Hidden widths of the three intermediate decoder layers.
    pub decoder_widths: Vec<usize>,
}

impl NetworkConfig {
    /// One sphere layer followed by three rotation-group layers, hidden
    /// channel width constant, final layer single-channel at a reduced
    /// bandwidth.
    pub fn with_scale(
        bandwidth: usize,
        final_bandwidth: usize,
        shells: usize,
        hidden: usize,
        support_radius: f64,
        fold_side: usize,
        decoder_widths: Vec<usize>,
    ) -> NetworkConfig {
        let layers = vec![
            LayerSpec {
                kind: LayerKind::Sphere,
                in_bandwidth: bandwidth,
                out_bandwidth: bandwidth,
                in_channels: shells,
                out_channels: hidden,
            },
            LayerSpec {
                kind: LayerKind::Rotation,
                in_bandwidth: bandwidth,
                out_bandwidth: bandwidth,
                in_channels: hidden,
                out_channels: hidden,
            },
            LayerSpec {
                kind: LayerKind::Rotation,
                in_bandwidth: bandwidth,
                out_bandwidth: bandwidth,
                in_channels: hidden,
                out_channels: hidden,
            },
            LayerSpec {
                kind: LayerKind::Rotation,
                in_bandwidth: bandwidth,
                out_bandwidth: final_bandwidth,
                in_channels: hidden,
                out_channels: 1,
            },
        ];
        NetworkConfig {
            input_shells: shells,
            support_radius,
            layers,
            fold_side,
            decoder_widths,
        }
    }

    /// Full-scale configuration: bandwidth 24 through the hidden layers,
    /// final bandwidth 4, 40 hidden channels.
    pub fn paper_scale() -> NetworkConfig {
        NetworkConfig::with_scale(24, 4, 4, 40, 0.30, 16, vec![256, 128, 64])
    }

    /// Reduced configuration that trains on a single CPU: bandwidth 8
    /// through the hidden layers, otherwise the same shape family.
    pub fn desk_scale() -> NetworkConfig {
        NetworkConfig::with_scale(8, 4, 4, 40, 0.30, 16, vec![256, 128, 64])
    }

    /// Miniature configuration for gradient checks: bandwidth 2, a handful
    /// of channels, 16 folding points.
    pub fn tiny() -> NetworkConfig {
        NetworkConfig::with_scale(2, 1, 2, 3, 0.30, 4, vec![8, 6, 5])
    }

    /// Bandwidth-8 encoder with few channels: full angular resolution (so
    /// binning aliasing stays small under rotation) at interactive cost.
    /// Used by pose-sensitivity probes rather than training runs.
    pub fn probe_scale() -> NetworkConfig {
        NetworkConfig::with_scale(8, 4, 2, 4, 0.30, 4, vec![8, 6, 5])
    }

    pub fn descriptor_bandwidth(&self) -> usize {
        self.layers.last().map(|l| l.out_bandwidth).unwrap_or(0)
    }

    /// Length of the flattened final feature map, `(2 b_final)^3`.
    pub fn descriptor_len(&self) -> usize {
        let n = 2 * self.descriptor_bandwidth();
        n * n * n
    }

    /// Number of folding-grid samples.
    pub fn fold_points(&self) -> usize {
        self.fold_side * self.fold_side
    }

    /// `(input, output)` widths of the four decoder layers.
    pub fn decoder_dims(&self) -> Vec<(usize, usize)> {
        let d = self.descriptor_len() + 2;
        let w = &self.decoder_widths;
        vec![(d, w[0]), (w[0], w[1]), (w[1], w[2]), (w[2], 3)]
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let fail = |msg: String| Err(NetworkError::InvalidConfig(msg));
        if self.layers.is_empty() {
            return fail("no encoder layers".into());
        }
        if self.support_radius <= 0.0 || !self.support_radius.is_finite() {
            return fail(format!("support radius must be positive, got {}", self.support_radius));
        }
        if self.fold_side == 0 {
            return fail("fold grid side must be at least 1".into());
        }
        if self.decoder_widths.len() != 3 {
            return fail(format!(
                "expected 3 decoder hidden widths, got {}",
                self.decoder_widths.len()
            ));
        }
        if self.decoder_widths.iter().any(|&w| w == 0) {
            return fail("decoder widths must be positive".into());
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_bandwidth == 0 || layer.out_bandwidth == 0 {
                return fail(format!("layer {i}: bandwidths must be at least 1"));
            }
            if layer.out_bandwidth > layer.in_bandwidth {
                return fail(format!(
                    "layer {i}: output bandwidth {} exceeds input bandwidth {}",
                    layer.out_bandwidth, layer.in_bandwidth
                ));
            }
            if layer.in_channels == 0 || layer.out_channels == 0 {
                return fail(format!("layer {i}: channel counts must be at least 1"));
            }
            let expected_kind = if i == 0 { LayerKind::Sphere } else { LayerKind::Rotation };
            if layer.kind != expected_kind {
                return fail(format!("layer {i}: expected {expected_kind:?} domain"));
            }
            if i == 0 && layer.in_channels != self.input_shells {
                return fail(format!(
                    "layer 0 input channels {} do not match shell count {}",
                    layer.in_channels, self.input_shells
                ));
            }
            if i > 0 {
                let prev = &self.layers[i - 1];
                if layer.in_channels != prev.out_channels {
                    return fail(format!(
                        "layer {i}: input channels {} do not chain from previous output {}",
                        layer.in_channels, prev.out_channels
                    ));
                }
                if layer.in_bandwidth != prev.out_bandwidth {
                    return fail(format!(
                        "layer {i}: input bandwidth {} does not chain from previous output {}",
                        layer.in_bandwidth, prev.out_bandwidth
                    ));
                }
            }
        }
        if self.layers.last().unwrap().out_channels != 1 {
            return fail("final layer must have exactly one output channel".into());
        }
        Ok(())
    }
}

/// Flattened single-channel final feature map on the rotation group.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub bandwidth: usize,
    /// Length `(2 bandwidth)^3`, row-major over (alpha, beta, gamma) bins.
    pub values: Vec<f64>,
}

impl Descriptor {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Wraps a single-channel rotation-group signal.
    pub fn from_signal(signal: &So3Signal) -> Descriptor {
        assert_eq!(signal.channels(), 1, "descriptor map must be single-channel");
        Descriptor {
            bandwidth: signal.bandwidth,
            values: signal.values.iter().copied().collect(),
        }
    }

    /// Views the flat values as a single-channel rotation-group signal.
    pub fn to_signal(&self) -> So3Signal {
        let n = 2 * self.bandwidth;
        assert_eq!(self.values.len(), n * n * n, "descriptor length");
        let mut signal = So3Signal::zeros(1, self.bandwidth);
        for (dst, src) in signal.values.iter_mut().zip(self.values.iter()) {
            *dst = *src;
        }
        signal
    }
}

/// Planar sample points folded by the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldGrid {
    /// Points in the unit square.
    pub samples: Vec<[f64; 2]>,
}

impl FoldGrid {
    /// Regular `side x side` lattice spanning the unit square inclusively.
    pub fn regular(side: usize) -> FoldGrid {
        assert!(side >= 1, "fold grid side must be at least 1");
        let coord = |i: usize| {
            if side == 1 {
                0.5
            } else {
                i as f64 / (side - 1) as f64
            }
        };
        let mut samples = Vec::with_capacity(side * side);
        for iy in 0..side {
            for ix in 0..side {
                samples.push([coord(ix), coord(iy)]);
            }
        }
        FoldGrid { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Grid-domain filters and bias of one encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayerWeights {
    /// Shape per [`LayerSpec::filter_shape`].
    pub filters: ArrayD<f64>,
    /// One bias per output channel.
    pub bias: Array1<f64>,
}

/// One fully connected decoder layer, stored as `(input, output)` matrix
/// plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseWeights {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// All learnable parameters plus the architecture they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: NetworkConfig,
    pub encoder: Vec<EncoderLayerWeights>,
    pub decoder: Vec<DenseWeights>,
}

impl ModelWeights {
    /// All-zero parameters for `config`.
    pub fn zeros(config: &NetworkConfig) -> Result<ModelWeights, NetworkError> {
        config.validate()?;
        let encoder = config
            .layers
            .iter()
            .map(|layer| EncoderLayerWeights {
                filters: ArrayD::zeros(layer.filter_shape()),
                bias: Array1::zeros(layer.out_channels),
            })
            .collect();
        let decoder = config
            .decoder_dims()
            .into_iter()
            .map(|(i, o)| DenseWeights {
                weight: Array2::zeros((i, o)),
                bias: Array1::zeros(o),
            })
            .collect();
        Ok(ModelWeights {
            config: config.clone(),
            encoder,
            decoder,
        })
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(|_| n += 1);
        n
    }

    /// Visits every parameter in the canonical order (encoder layers first,
    /// filters before bias; then decoder layers, matrix before bias). The
    /// optimizer and checkpoint code rely on this order being stable.
    pub fn visit_params(&self, mut f: impl FnMut(f64)) {
        for layer in &self.encoder {
            for &v in layer.filters.iter() {
                f(v);
            }
            for &v in layer.bias.iter() {
                f(v);
            }
        }
        for layer in &self.decoder {
            for &v in layer.weight.iter() {
                f(v);
            }
            for &v in layer.bias.iter() {
                f(v);
            }
        }
    }

    /// Mutable counterpart of [`ModelWeights::visit_params`], same order.
    pub fn visit_params_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for layer in &mut self.encoder {
            for v in layer.filters.iter_mut() {
                f(v);
            }
            for v in layer.bias.iter_mut() {
                f(v);
            }
        }
        for layer in &mut self.decoder {
            for v in layer.weight.iter_mut() {
                f(v);
            }
            for v in layer.bias.iter_mut() {
                f(v);
            }
        }
    }

    /// True when every parameter is finite.
    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit_params(|v| ok &= v.is_finite());
        ok
    }
}

/// Gradients (or any other per-parameter companion values) shaped exactly
/// like [`ModelWeights`], without the config.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub encoder: Vec<EncoderLayerWeights>,
    pub decoder: Vec<DenseWeights>,
}

impl ModelGradients {
    pub fn zeros_like(w: &ModelWeights) -> ModelGradients {
        ModelGradients {
            encoder: w
                .encoder
                .iter()
                .map(|l| EncoderLayerWeights {
                    filters: ArrayD::zeros(l.filters.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
            decoder: w
                .decoder
                .iter()
                .map(|l| DenseWeights {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    /// Same canonical order as [`ModelWeights::visit_params`].
    pub fn visit_params(&self, mut f: impl FnMut(f64)) {
        for layer in &self.encoder {
            for &v in layer.filters.iter() {
                f(v);
            }
            for &v in layer.bias.iter() {
                f(v);
            }
        }
        for layer in &self.decoder {
            for &v in layer.weight.iter() {
                f(v);
            }
            for &v in layer.bias.iter() {
                f(v);
            }
        }
    }

    pub fn visit_params_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for layer in &mut self.encoder {
            for v in layer.filters.iter_mut() {
                f(v);
            }
            for v in layer.bias.iter_mut() {
                f(v);
            }
        }
        for layer in &mut self.decoder {
            for v in layer.weight.iter_mut() {
                f(v);
            }
            for v in layer.bias.iter_mut() {
                f(v);
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.visit_params_mut(|v| *v *= s);
    }

    pub fn add(&mut self, other: &ModelGradients) {
        let mut vals = Vec::new();
        other.visit_params(|v| vals.push(v));
        let mut i = 0;
        self.visit_params_mut(|v| {
            *v += vals[i];
            i += 1;
        });
    }

    /// Name of the first tensor containing a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        for (i, layer) in self.encoder.iter().enumerate() {
            if layer.filters.iter().any(|v| !v.is_finite()) {
                return Some(format!("encoder.{i}.filters"));
            }
            if layer.bias.iter().any(|v| !v.is_finite()) {
                return Some(format!("encoder.{i}.bias"));
            }
        }
        for (i, layer) in self.decoder.iter().enumerate() {
            if layer.weight.iter().any(|v| !v.is_finite()) {
                return Some(format!("decoder.{i}.weight"));
            }
            if layer.bias.iter().any(|v| !v.is_finite()) {
                return Some(format!("decoder.{i}.bias"));
            }
        }
        None
    }
}

/// Rounds through 32-bit storage precision so that freshly initialized
/// weights survive a checkpoint round trip bit-exactly.
#[inline]
fn quantize(x: f64) -> f64 {
    x as f32 as f64
}

/// Zero-mean Gaussian initialization with variance `2 / fan_in` for filters
/// and decoder matrices; biases start at zero.
pub fn init_weights<R: Rng + ?Sized>(
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<ModelWeights, NetworkError> {
    let mut w = ModelWeights::zeros(config)?;
    for (layer, spec) in w.encoder.iter_mut().zip(config.layers.iter()) {
        let fan_in = spec.in_channels * spec.filter_cells();
        let std = (2.0 / fan_in as f64).sqrt();
        for v in layer.filters.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = quantize(std * z);
        }
    }
    for layer in w.decoder.iter_mut() {
        let fan_in = layer.weight.nrows();
        let std = (2.0 / fan_in as f64).sqrt();
        for v in layer.weight.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = quantize(std * z);
        }
    }
    Ok(w)
}
