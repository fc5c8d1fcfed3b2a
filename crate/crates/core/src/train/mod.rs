//! Unsupervised training of the descriptor network.
//!
//! Each training sample is a raw keypoint neighborhood. A step builds the
//! density signal for a mini-batch of (optionally randomly rotated)
//! neighborhoods, encodes and decodes them, measures the symmetric
//! nearest-neighbor distance between each reconstruction and its own
//! support-normalized input points, backpropagates, and applies one
//! adaptive-moment update. Nothing ever aligns the inputs to a canonical
//! pose: the random per-sample rotations are the point of the exercise.
//!
//! The whole loop is deterministic for a fixed seed on a single thread; the
//! per-iteration records (iteration, learning rate, loss) can be exported
//! as CSV.

mod adam;
mod backward;
mod chamfer;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use backward::{decoder_backward, encoder_backward, loss_and_gradients};
pub use chamfer::{chamfer_and_grad, chamfer_loss};

use nalgebra::Vector3;
use ndarray::{s, Array4};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{sample_uniform_rotation, PointCloud};
use crate::network::{FoldGrid, ModelWeights, NetworkConfig, NetworkError};
use crate::signal::{build_spherical_signal, SignalError, SphericalSignal, SupportSpec};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty point set in reconstruction loss")]
    EmptyPointSet,
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("invalid training setup: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss ({value}) at iteration {iteration}")]
    NonFiniteLoss { iteration: u64, value: f64 },
    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Hyperparameters of the training loop.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// The learning rate is multiplied by `decay_factor` after every
    /// `decay_interval` completed iterations.
    pub decay_interval: u64,
    pub decay_factor: f64,
    pub epochs: usize,
    /// Hard cap on optimizer steps for this call, counted on top of any
    /// resumed iterations; `None` runs the full epoch budget.
    pub max_iterations: Option<u64>,
    /// Neighborhoods larger than this are randomly subsampled.
    pub max_points: usize,
    /// Rotate every sample by a fresh uniformly random rotation each time
    /// it is visited.
    pub augment: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            batch_size: 32,
            learning_rate: 1e-3,
            decay_interval: 4000,
            decay_factor: 0.5,
            epochs: 14,
            max_iterations: None,
            max_points: 1024,
            augment: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.decay_interval == 0 {
            return Err(TrainError::InvalidConfig("decay_interval must be positive".into()));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(TrainError::InvalidConfig("decay_factor must be in (0, 1]".into()));
        }
        if self.max_points == 0 {
            return Err(TrainError::InvalidConfig("max_points must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// One training sample: the support points of a keypoint, as offsets from
/// the keypoint itself (world units).
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub offsets: Vec<Vector3<f64>>,
}

/// Collects the in-support offsets around each center.
pub fn extract_neighborhoods(
    cloud: &PointCloud,
    centers: &[Vector3<f64>],
    radius: f64,
) -> Vec<Neighborhood> {
    centers
        .iter()
        .map(|c| Neighborhood {
            offsets: cloud
                .points
                .iter()
                .filter(|p| (*p - c).norm() <= radius)
                .map(|p| p - c)
                .collect(),
        })
        .collect()
}

/// One line of the training history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: u64,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub history: Vec<LossRecord>,
    pub state: AdamState,
}

/// Learning rate used by the step whose 0-based global index is
/// `completed` (the number of iterations finished before it).
pub fn learning_rate_at(cfg: &TrainConfig, completed: u64) -> f64 {
    cfg.learning_rate * cfg.decay_factor.powi((completed / cfg.decay_interval) as i32)
}

/// Writes the history as `iteration,lr,loss` lines with a header row.
pub fn write_loss_csv<W: std::io::Write>(
    history: &[LossRecord],
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "iteration,lr,loss")?;
    for r in history {
        writeln!(out, "{},{},{}", r.iteration, r.lr, r.loss)?;
    }
    Ok(())
}

/// Draws the per-visit view of a sample: optional random rotation, then a
/// random subsample down to `max_points` if needed. Returns the density
/// signal and the support-normalized target set. The draw order (rotation
/// first, then subsample) is part of the determinism contract.
fn prepare_sample(
    nb: &Neighborhood,
    cfg: &TrainConfig,
    spec: &SupportSpec,
    rng: &mut ChaCha8Rng,
) -> (SphericalSignal, Vec<Vector3<f64>>) {
    let mut pts = nb.offsets.clone();
    if cfg.augment {
        let r = sample_uniform_rotation(rng);
        let m = r.to_matrix();
        for p in pts.iter_mut() {
            *p = m * *p;
        }
    }
    if pts.len() > cfg.max_points {
        for i in 0..cfg.max_points {
            let j = rng.random_range(i..pts.len());
            pts.swap(i, j);
        }
        pts.truncate(cfg.max_points);
    }
    let signal = build_spherical_signal(&PointCloud::new(pts.clone()), &Vector3::zeros(), spec);
    let targets = pts.iter().map(|p| p / spec.radius).collect();
    (signal, targets)
}

/// Stacks per-sample signals into the `(batch, shells, 2b, 2b)` input.
fn stack_signals(
    cfg: &NetworkConfig,
    signals: &[SphericalSignal],
) -> Result<Array4<f64>, TrainError> {
    let b0 = cfg.layers[0].in_bandwidth;
    let shells = cfg.layers[0].in_channels;
    let n = 2 * b0;
    let mut out = Array4::zeros((signals.len(), shells, n, n));
    for (i, sig) in signals.iter().enumerate() {
        if sig.channels() != shells || sig.bandwidth != b0 {
            return Err(TrainError::InvalidConfig(format!(
                "signal {i}: expected {shells} shells at bandwidth {b0}, got {} at {}",
                sig.channels(),
                sig.bandwidth
            )));
        }
        out.slice_mut(s![i, .., .., ..]).assign(&sig.values);
    }
    Ok(out)
}

/// Runs the optimization loop, mutating `weights` in place.
///
/// Iterates shuffled mini-batches for up to `cfg.epochs` passes over
/// `samples`, stopping early once `cfg.max_iterations` additional steps
/// have run. Passing the optimizer state of a previous run resumes it: the
/// iteration count, the moment estimates, and the learning-rate schedule
/// all continue where they left off.
pub fn train(
    weights: &mut ModelWeights,
    samples: &[Neighborhood],
    cfg: &TrainConfig,
    resume: Option<AdamState>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let net = weights.config.clone();
    net.validate()?;
    let spec = SupportSpec::new(net.support_radius, net.input_shells, net.layers[0].in_bandwidth)?;
    let grid = FoldGrid::regular(net.fold_side);

    let mut state = resume.unwrap_or_else(|| AdamState::new(weights.param_count()));
    if state.m.len() != weights.param_count() {
        return Err(TrainError::InvalidConfig(format!(
            "resumed optimizer state holds {} parameters, model has {}",
            state.m.len(),
            weights.param_count()
        )));
    }
    let start = state.step;
    // A fresh stream per segment: resuming does not replay the batches of
    // the original run.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(start));
    let mut history = Vec::new();

    'epochs: for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(cfg.batch_size) {
            if let Some(cap) = cfg.max_iterations {
                if state.step - start >= cap {
                    break 'epochs;
                }
            }
            let mut signals = Vec::with_capacity(chunk.len());
            let mut targets = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let (sig, tgt) = prepare_sample(&samples[idx], cfg, &spec, &mut rng);
                signals.push(sig);
                targets.push(tgt);
            }
            let input = stack_signals(&net, &signals)?;
            let (loss, grads) = loss_and_gradients(weights, &input, &targets, &grid, true)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    iteration: state.step + 1,
                    value: loss,
                });
            }
            let grads = grads.expect("gradients requested");
            if let Some(name) = grads.first_non_finite() {
                return Err(TrainError::NonFiniteGradient(name));
            }
            let lr = learning_rate_at(cfg, state.step);
            adam_step(weights, &grads, &mut state, lr)?;
            history.push(LossRecord {
                iteration: state.step,
                lr,
                loss,
            });
        }
    }
    Ok(TrainOutcome { history, state })
}
