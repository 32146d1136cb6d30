//! The multi-scale residual network.
//!
//! Two fusion blocks are cascaded, followed by a reconstruction stack. Each
//! fusion block runs `long_depth` conv+ReLU layers and adds the activation
//! after layer `short_depth` (the short path, sharing the long path's first
//! layers) to the activation after the final layer. The reconstruction stack
//! is `recon_depth - 1` conv+ReLU layers and a bare single-filter conv. The
//! network predicts the residual; [`MssrModel::restore`] adds it back.

mod io;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::conv::{ConvLayer, TAPS};
use crate::error::{Error, Result};
use crate::ops::{add, add_assign, relu_backward, relu_forward};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

pub use io::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};

/// Luminance in, residual out.
pub const IMAGE_CHANNELS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Hyperparams {
    /// Layers in the long path of each fusion block.
    pub long_depth: usize,
    /// Layers in the short path; it reuses the long path's first layers.
    pub short_depth: usize,
    /// Layers in the reconstruction stack.
    pub recon_depth: usize,
    /// Filters per hidden layer.
    pub width: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            long_depth: 9,
            short_depth: 2,
            recon_depth: 2,
            width: 64,
        }
    }
}

impl Hyperparams {
    pub fn with_width(self, width: usize) -> Self {
        Hyperparams { width, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let Hyperparams {
            long_depth,
            short_depth,
            recon_depth,
            width,
        } = *self;
        if short_depth < 1 || short_depth >= long_depth {
            return Err(Error::Argument(format!(
                "short path depth must satisfy 1 <= N_S < N_L, got N_S={short_depth}, N_L={long_depth}"
            )));
        }
        if recon_depth < 1 || width < 1 {
            return Err(Error::Argument(format!(
                "reconstruction depth and width must be at least 1, got N_r={recon_depth}, width={width}"
            )));
        }
        if [long_depth, short_depth, recon_depth, width]
            .iter()
            .any(|&v| v > u16::MAX as usize)
        {
            return Err(Error::Argument("hyperparameters must fit in 16 bits".into()));
        }
        Ok(())
    }

    /// Distinct conv layers: two long paths plus reconstruction. The short
    /// paths own no parameters.
    pub fn layer_count(&self) -> usize {
        2 * self.long_depth + self.recon_depth
    }

    /// `(out, in)` channel counts of every layer in canonical order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let w = self.width;
        let mut shapes = Vec::with_capacity(self.layer_count());
        for block in 0..2 {
            for k in 0..self.long_depth {
                let cin = if block == 0 && k == 0 { IMAGE_CHANNELS } else { w };
                shapes.push((w, cin));
            }
        }
        for k in 0..self.recon_depth {
            let cout = if k + 1 == self.recon_depth { IMAGE_CHANNELS } else { w };
            shapes.push((cout, w));
        }
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|&(o, i)| o * i * TAPS + o)
            .sum()
    }

    pub fn receptive_fields(&self) -> ReceptiveFields {
        receptive_fields(self.short_depth, self.long_depth, self.recon_depth)
    }
}

/// Receptive field sizes, in pixels, of the three streams through the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceptiveFields {
    pub small: usize,
    pub middle: usize,
    pub large: usize,
}

/// Each 3x3 layer grows the field by two pixels. The small stream takes the
/// short path through both blocks, the middle stream one short and one long
/// path, the large stream both long paths.
pub fn receptive_fields(short_depth: usize, long_depth: usize, recon_depth: usize) -> ReceptiveFields {
    ReceptiveFields {
        small: 2 * (short_depth + short_depth + recon_depth) + 1,
        middle: 2 * (short_depth + long_depth + recon_depth) + 1,
        large: 2 * (long_depth + long_depth + recon_depth) + 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionBlock<T> {
    layers: Vec<ConvLayer<T>>,
    tap: usize,
}

impl<T: Scalar> FusionBlock<T> {
    /// Builds a block from its long-path layers; `tap` is the short-path depth.
    pub fn new(layers: Vec<ConvLayer<T>>, tap: usize) -> Result<Self> {
        if tap < 1 || tap >= layers.len() {
            return Err(Error::Argument(format!(
                "fusion tap must satisfy 1 <= tap < {}, got {tap}",
                layers.len()
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].out_channels() != pair[1].in_channels() {
                return Err(Error::Argument(format!(
                    "consecutive block layers disagree on channels: {} -> {}",
                    pair[0].out_channels(),
                    pair[1].in_channels()
                )));
            }
        }
        if layers[tap - 1].out_channels() != layers[layers.len() - 1].out_channels() {
            return Err(Error::Argument("tap and block output widths differ".into()));
        }
        Ok(FusionBlock { layers, tap })
    }

    pub fn layers(&self) -> &[ConvLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer<T>] {
        &mut self.layers
    }

    pub fn tap(&self) -> usize {
        self.tap
    }

    pub fn forward(&self, input: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut cur = input.clone();
        let mut tapped = None;
        for (k, layer) in self.layers.iter().enumerate() {
            cur = relu_forward(&layer.forward(&cur)?);
            if k + 1 == self.tap {
                tapped = Some(cur.clone());
            }
        }
        add(&tapped.expect("tap inside block"), &cur)
    }

    fn forward_traced(&self, input: Arc<Tensor4<T>>, records: &mut Vec<LayerRecord<T>>) -> Result<Tensor4<T>> {
        let mut cur = input;
        let mut tapped = None;
        for (k, layer) in self.layers.iter().enumerate() {
            let out = Arc::new(relu_forward(&layer.forward(&cur)?));
            records.push(LayerRecord {
                input: cur,
                output: Arc::clone(&out),
            });
            if k + 1 == self.tap {
                tapped = Some(Arc::clone(&out));
            }
            cur = out;
        }
        add(&tapped.expect("tap inside block"), &cur)
    }

    /// `records` holds exactly this block's layers.
    fn backward(&mut self, records: &[LayerRecord<T>], grad_output: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut g = grad_output.clone();
        for (k, (layer, rec)) in self.layers.iter_mut().zip(records).enumerate().rev() {
            if k + 1 == self.tap {
                // short path: the block output also depends on this activation directly
                add_assign(&mut g, grad_output)?;
            }
            g = relu_backward(&rec.output, &g)?;
            g = layer.backward(&rec.input, &g)?;
        }
        Ok(g)
    }
}

#[derive(Debug, Clone)]
struct LayerRecord<T> {
    input: Arc<Tensor4<T>>,
    /// Post-activation output (raw output for the final layer).
    output: Arc<Tensor4<T>>,
}

/// Activations retained by [`MssrModel::forward_traced`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    version: u64,
    records: Vec<LayerRecord<T>>,
    residual: Tensor4<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn residual(&self) -> &Tensor4<T> {
        &self.residual
    }

    pub fn layer_count(&self) -> usize {
        self.records.len()
    }

    /// Sign pattern of every ReLU in the network (`true` where active).
    pub fn activation_pattern(&self) -> Vec<bool> {
        let relus = self.records.len() - 1;
        self.records[..relus]
            .iter()
            .flat_map(|r| r.output.as_slice().iter().map(|&v| v > T::zero()))
            .collect()
    }
}

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone)]
pub struct MssrModel<T> {
    hyper: Hyperparams,
    blocks: [FusionBlock<T>; 2],
    recon: Vec<ConvLayer<T>>,
    /// Changes whenever parameters may have changed; traces record it.
    version: u64,
    grads_ready: bool,
}

impl<T: Scalar> PartialEq for MssrModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.hyper == other.hyper && self.blocks == other.blocks && self.recon == other.recon
    }
}

impl<T: Scalar> MssrModel<T> {
    /// All-zero parameters: predicts a zero residual everywhere.
    pub fn zeros(hyper: Hyperparams) -> Result<Self> {
        hyper.validate()?;
        let mut layers = hyper
            .layer_shapes()
            .into_iter()
            .map(|(o, i)| ConvLayer::zeros(i, o))
            .collect::<Vec<_>>();
        Self::from_layers(hyper, &mut layers)
    }

    pub fn he_init(hyper: Hyperparams, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(hyper)?;
        m.init_he(seed);
        Ok(m)
    }

    /// Assembles a model from layers in canonical order (block 1, block 2,
    /// reconstruction), checking them against `hyper`.
    pub fn from_layers(hyper: Hyperparams, layers: &mut Vec<ConvLayer<T>>) -> Result<Self> {
        hyper.validate()?;
        let shapes = hyper.layer_shapes();
        if layers.len() != shapes.len() {
            return Err(Error::Argument(format!(
                "expected {} layers, got {}",
                shapes.len(),
                layers.len()
            )));
        }
        for (i, (layer, &(o, c))) in layers.iter().zip(&shapes).enumerate() {
            if (layer.out_channels(), layer.in_channels()) != (o, c) {
                return Err(Error::Argument(format!(
                    "layer {i} is {}->{}, expected {c}->{o}",
                    layer.in_channels(),
                    layer.out_channels()
                )));
            }
        }
        let recon = layers.split_off(2 * hyper.long_depth);
        let second = layers.split_off(hyper.long_depth);
        let first = std::mem::take(layers);
        Ok(MssrModel {
            hyper,
            blocks: [
                FusionBlock::new(first, hyper.short_depth)?,
                FusionBlock::new(second, hyper.short_depth)?,
            ],
            recon,
            version: fresh_version(),
            grads_ready: false,
        })
    }

    pub fn hyperparams(&self) -> Hyperparams {
        self.hyper
    }

    pub fn blocks(&self) -> &[FusionBlock<T>; 2] {
        &self.blocks
    }

    pub fn recon_layers(&self) -> &[ConvLayer<T>] {
        &self.recon
    }

    /// Every distinct conv layer in canonical order.
    pub fn layers(&self) -> impl Iterator<Item = &ConvLayer<T>> {
        self.blocks
            .iter()
            .flat_map(|b| b.layers.iter())
            .chain(self.recon.iter())
    }

    /// Mutable access to the parameters. Outstanding traces become stale.
    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut ConvLayer<T>> {
        self.version = fresh_version();
        self.blocks
            .iter_mut()
            .flat_map(|b| b.layers.iter_mut())
            .chain(self.recon.iter_mut())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(ConvLayer::param_count).sum()
    }

    pub fn receptive_fields(&self) -> ReceptiveFields {
        self.hyper.receptive_fields()
    }

    /// He-normal weights (variance `2 / fan_in`, `fan_in = in_channels * 9`)
    /// and zero biases, drawn layer by layer from one seeded stream.
    pub fn init_he(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in self.layers_mut() {
            let fan_in = (layer.in_channels() * TAPS) as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
            for w in layer.weights_mut() {
                *w = T::of(normal.sample(&mut rng));
            }
            layer.bias_mut().iter_mut().for_each(|b| *b = T::zero());
            layer.zero_grad();
        }
        self.grads_ready = false;
    }

    /// Parameters flattened in canonical order: per layer, weights then bias.
    pub fn flatten_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for layer in self.layers() {
            out.extend_from_slice(layer.weights());
            out.extend_from_slice(layer.bias());
        }
        out
    }

    /// Gradients in the same order as [`flatten_params`](Self::flatten_params).
    pub fn flatten_grads(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for layer in self.layers() {
            out.extend_from_slice(layer.grad_weights());
            out.extend_from_slice(layer.grad_bias());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::Argument(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                flat.len()
            )));
        }
        let mut rest = flat;
        for layer in self.layers_mut() {
            let (w, tail) = rest.split_at(layer.weights.len());
            layer.weights.copy_from_slice(w);
            let (b, tail) = tail.split_at(layer.bias.len());
            layer.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for block in &mut self.blocks {
            block.layers.iter_mut().for_each(ConvLayer::zero_grad);
        }
        self.recon.iter_mut().for_each(ConvLayer::zero_grad);
        self.grads_ready = false;
    }

    /// Whether gradient buffers hold the result of a backward pass.
    pub fn grads_ready(&self) -> bool {
        self.grads_ready
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<()> {
        let s = x.shape();
        if s.channels != IMAGE_CHANNELS {
            return Err(Error::shape(
                "model input vs luminance input",
                s,
                s.with_channels(IMAGE_CHANNELS),
            ));
        }
        Ok(())
    }

    /// Predicted residual `F(x)`, same shape as `x`.
    pub fn forward(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check_input(x)?;
        let mut h = self.blocks[0].forward(x)?;
        h = self.blocks[1].forward(&h)?;
        let last = self.recon.len() - 1;
        for (k, layer) in self.recon.iter().enumerate() {
            h = layer.forward(&h)?;
            if k < last {
                h = relu_forward(&h);
            }
        }
        Ok(h)
    }

    /// `x + F(x)`.
    pub fn restore(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        add(x, &self.forward(x)?)
    }

    pub fn forward_traced(&self, x: &Tensor4<T>) -> Result<ForwardTrace<T>> {
        self.check_input(x)?;
        let mut records = Vec::with_capacity(self.hyper.layer_count());
        let mut h = self.blocks[0].forward_traced(Arc::new(x.clone()), &mut records)?;
        h = self.blocks[1].forward_traced(Arc::new(h), &mut records)?;
        let mut cur = Arc::new(h);
        let last = self.recon.len() - 1;
        for (k, layer) in self.recon.iter().enumerate() {
            let mut out = layer.forward(&cur)?;
            if k < last {
                out = relu_forward(&out);
            }
            let out = Arc::new(out);
            records.push(LayerRecord {
                input: cur,
                output: Arc::clone(&out),
            });
            cur = out;
        }
        let residual = (*cur).clone();
        Ok(ForwardTrace {
            version: self.version,
            records,
            residual,
        })
    }

    /// Accumulates `d loss / d params` into every layer's gradient buffers
    /// and returns `d loss / d x`. Shared short-path layers receive the sum of
    /// both paths' contributions.
    pub fn backward(&mut self, trace: &ForwardTrace<T>, grad_residual: &Tensor4<T>) -> Result<Tensor4<T>> {
        if trace.version != self.version || trace.records.len() != self.hyper.layer_count() {
            return Err(Error::Contract(
                "forward trace does not belong to the current model parameters".into(),
            ));
        }
        grad_residual.expect_shape(trace.residual.shape(), "grad_residual vs predicted residual")?;

        let nl = self.hyper.long_depth;
        let (blocks_rec, recon_rec) = trace.records.split_at(2 * nl);
        let last = self.recon.len() - 1;
        let mut g = grad_residual.clone();
        for (k, (layer, rec)) in self.recon.iter_mut().zip(recon_rec).enumerate().rev() {
            if k < last {
                g = relu_backward(&rec.output, &g)?;
            }
            g = layer.backward(&rec.input, &g)?;
        }
        g = self.blocks[1].backward(&blocks_rec[nl..], &g)?;
        g = self.blocks[0].backward(&blocks_rec[..nl], &g)?;
        self.grads_ready = true;
        Ok(g)
    }
}
