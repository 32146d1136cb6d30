//! Multi-scale residual training.
//!
//! Samples of every up-scale factor are pooled into one list and shuffled
//! together, so a single model learns all factors. The per-batch objective is
//! `1/(2B) * sum_i ||r_i - F(x_i)||^2`.

mod adam;
mod trainer;

use std::borrow::Borrow;

use crate::error::{Error, Result};
use crate::imaging::ImagePlane;
use crate::model::MssrModel;
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

pub use adam::AdamState;
pub use trainer::{train, EpochRecord, TrainReport, Trainer, LOG_FILE, LOG_HEADER};

pub const SCALES: [u8; 3] = [2, 3, 4];

/// An interpolated low-resolution patch, its residual to the ground truth and
/// the up-scale factor that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample<T> {
    pub x: ImagePlane<T>,
    pub r: ImagePlane<T>,
    pub scale: u8,
}

impl<T: Scalar> TrainSample<T> {
    pub fn new(x: ImagePlane<T>, r: ImagePlane<T>, scale: u8) -> Result<Self> {
        x.check_same_dims(&r, "sample input vs residual")?;
        if !SCALES.contains(&scale) {
            return Err(Error::Argument(format!("scale must be 2, 3 or 4, got {scale}")));
        }
        let tol = T::of(1e-6);
        if x.as_slice().iter().any(|&v| !(v >= -tol && v <= T::one() + tol)) {
            return Err(Error::Argument("sample input values must lie in [0, 1]".into()));
        }
        if r.as_slice().iter().any(|&v| !(v.abs() <= T::one() + tol)) {
            return Err(Error::Argument("sample residual values must lie in [-1, 1]".into()));
        }
        Ok(TrainSample { x, r, scale })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub initial_lr: f64,
    /// First epoch (0-based) trained at `initial_lr / 10`.
    pub lr_drop_epoch: usize,
    pub total_epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 coefficient added to the raw gradient before the Adam moments.
    pub weight_decay: f64,
    pub seed: u64,
    /// When false the `seconds` column of the training log is written as 0 so
    /// that logs from identical runs compare byte for byte.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            initial_lr: 1e-4,
            lr_drop_epoch: 80,
            total_epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-4,
            seed: 0,
            record_wall_time: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size as f64),
            ("initial_lr", self.initial_lr),
            ("lr_drop_epoch", self.lr_drop_epoch as f64),
            ("total_epochs", self.total_epochs as f64),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("epsilon", self.epsilon),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Argument(format!("{name} must be positive, got {v}")));
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::Argument("Adam betas must be below 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Argument("weight_decay must be non-negative".into()));
        }
        if self.lr_drop_epoch > self.total_epochs {
            return Err(Error::Argument(format!(
                "lr_drop_epoch ({}) exceeds total_epochs ({})",
                self.lr_drop_epoch, self.total_epochs
            )));
        }
        Ok(())
    }
}

/// Step schedule: `initial_lr` before `lr_drop_epoch`, a tenth of it after.
pub fn lr_schedule(epoch: usize, config: &TrainConfig) -> f64 {
    if epoch < config.lr_drop_epoch {
        config.initial_lr
    } else {
        config.initial_lr / 10.0
    }
}

fn stack_batch<T: Scalar, S: Borrow<TrainSample<T>>>(batch: &[S]) -> Result<(Tensor4<T>, Tensor4<T>)> {
    let first = batch
        .first()
        .ok_or_else(|| Error::Argument("batch must not be empty".into()))?
        .borrow();
    let (h, w) = first.x.dims();
    for s in batch {
        first.x.check_same_dims(&s.borrow().x, "batch members differ in size")?;
    }
    let x = Tensor4::stack_planes(h, w, batch.iter().map(|s| s.borrow().x.as_slice()))?;
    let r = Tensor4::stack_planes(h, w, batch.iter().map(|s| s.borrow().r.as_slice()))?;
    Ok((x, r))
}

/// Loss of `model` on `batch` without touching gradients.
pub fn batch_loss<T: Scalar, S: Borrow<TrainSample<T>>>(model: &MssrModel<T>, batch: &[S]) -> Result<T> {
    let (x, r) = stack_batch(batch)?;
    let pred = model.forward(&x)?;
    let sse: T = pred
        .as_slice()
        .iter()
        .zip(r.as_slice())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    Ok(sse / T::of(2.0 * batch.len() as f64))
}

/// Returns the batch loss and adds its gradient to the model's buffers.
pub fn loss_and_grad<T: Scalar, S: Borrow<TrainSample<T>>>(model: &mut MssrModel<T>, batch: &[S]) -> Result<T> {
    let (x, r) = stack_batch(batch)?;
    let trace = model.forward_traced(&x)?;
    let b = T::of(batch.len() as f64);
    let mut sse = T::zero();
    let mut grad = Vec::with_capacity(r.shape().len());
    for (&p, &t) in trace.residual().as_slice().iter().zip(r.as_slice()) {
        let d = p - t;
        sse += d * d;
        grad.push(d / b);
    }
    let grad = Tensor4::from_vec(r.shape(), grad)?;
    model.backward(&trace, &grad)?;
    Ok(sse / (b + b))
}

/// [`AdamState::step`] applied to the model's flattened parameters; gradients
/// are cleared afterwards.
pub fn adam_step<T: Scalar>(model: &mut MssrModel<T>, state: &mut AdamState<T>) -> Result<()> {
    if !model.grads_ready() {
        return Err(Error::Contract(
            "adam_step called without gradients from a backward pass".into(),
        ));
    }
    let mut params = model.flatten_params();
    let grads = model.flatten_grads();
    state.step(&mut params, &grads)?;
    model.set_params(&params)?;
    model.zero_grad();
    Ok(())
}
