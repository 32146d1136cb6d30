//! 3x3 convolution with stride 1 and one pixel of zero padding.
//!
//! Spatial size is always preserved. Work is split across output planes (forward),
//! input planes (input gradient) and output channels (weight gradient), so every
//! output element is reduced by exactly one thread in a fixed order and results
//! do not depend on the size of the thread pool.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

pub const KERNEL: usize = 3;
pub const TAPS: usize = KERNEL * KERNEL;

/// Weights are stored `out x in x 3 x 3`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    in_channels: usize,
    out_channels: usize,
    pub(crate) weights: Vec<T>,
    pub(crate) bias: Vec<T>,
    pub(crate) grad_weights: Vec<T>,
    pub(crate) grad_bias: Vec<T>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        assert!(in_channels > 0 && out_channels > 0, "conv layer needs at least one channel");
        let nw = out_channels * in_channels * TAPS;
        ConvLayer {
            in_channels,
            out_channels,
            weights: vec![T::zero(); nw],
            bias: vec![T::zero(); out_channels],
            grad_weights: vec![T::zero(); nw],
            grad_bias: vec![T::zero(); out_channels],
        }
    }

    pub fn from_parts(in_channels: usize, out_channels: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        let mut layer = Self::zeros(in_channels, out_channels);
        if weights.len() != layer.weights.len() || bias.len() != out_channels {
            return Err(Error::Dimensions(format!(
                "{out_channels}x{in_channels} conv layer needs {} weights and {out_channels} biases, got {} and {}",
                layer.weights.len(),
                weights.len(),
                bias.len()
            )));
        }
        layer.weights = weights;
        layer.bias = bias;
        Ok(layer)
    }

    /// `channels -> channels` layer that copies its input.
    pub fn identity(channels: usize) -> Self {
        let mut layer = Self::zeros(channels, channels);
        for c in 0..channels {
            layer.weights[(c * channels + c) * TAPS + 4] = T::one();
        }
        layer
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn grad_weights(&self) -> &[T] {
        &self.grad_weights
    }

    pub fn grad_bias(&self) -> &[T] {
        &self.grad_bias
    }

    #[inline]
    pub fn weight(&self, o: usize, c: usize, dy: usize, dx: usize) -> T {
        self.weights[(o * self.in_channels + c) * TAPS + dy * KERNEL + dx]
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn zero_grad(&mut self) {
        self.grad_weights.iter_mut().for_each(|g| *g = T::zero());
        self.grad_bias.iter_mut().for_each(|g| *g = T::zero());
    }

    fn check_input(&self, input: &Tensor4<T>) -> Result<()> {
        let s = input.shape();
        if s.channels != self.in_channels {
            return Err(Error::shape(
                "conv input vs layer input channels",
                s,
                s.with_channels(self.in_channels),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check_input(input)?;
        let s = input.shape();
        let (h, w) = (s.height, s.width);
        let out_shape = s.with_channels(self.out_channels);
        let mut out = Tensor4::zeros(out_shape)?;
        let cin = self.in_channels;
        let src = input.as_slice();

        out.as_mut_slice()
            .par_chunks_mut(h * w)
            .enumerate()
            .for_each(|(plane, dst)| {
                let b = plane / self.out_channels;
                let o = plane % self.out_channels;
                dst.iter_mut().for_each(|v| *v = self.bias[o]);
                for c in 0..cin {
                    let inp = &src[s.index(b, c, 0, 0)..][..h * w];
                    let kernel = &self.weights[(o * cin + c) * TAPS..][..TAPS];
                    accumulate_shifted(dst, inp, kernel, h, w, Direction::Correlate);
                }
            });
        Ok(out)
    }

    /// Returns the gradient with respect to `input` and adds the parameter
    /// gradients into this layer's gradient buffers.
    pub fn backward(&mut self, input: &Tensor4<T>, grad_output: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check_input(input)?;
        let s = input.shape();
        grad_output.expect_shape(s.with_channels(self.out_channels), "conv grad_output vs forward output")?;
        let (h, w) = (s.height, s.width);
        let (cin, cout) = (self.in_channels, self.out_channels);
        let src = input.as_slice();
        let g = grad_output.as_slice();
        let out_shape = grad_output.shape();

        let mut grad_input = Tensor4::zeros(s)?;
        grad_input
            .as_mut_slice()
            .par_chunks_mut(h * w)
            .enumerate()
            .for_each(|(plane, dst)| {
                let b = plane / cin;
                let c = plane % cin;
                for o in 0..cout {
                    let go = &g[out_shape.index(b, o, 0, 0)..][..h * w];
                    let kernel = &self.weights[(o * cin + c) * TAPS..][..TAPS];
                    accumulate_shifted(dst, go, kernel, h, w, Direction::Convolve);
                }
            });

        self.grad_weights
            .par_chunks_mut(cin * TAPS)
            .zip(self.grad_bias.par_iter_mut())
            .enumerate()
            .for_each(|(o, (gw, gb))| {
                for b in 0..s.batch {
                    let go = &g[out_shape.index(b, o, 0, 0)..][..h * w];
                    *gb += go.iter().copied().sum::<T>();
                    for c in 0..cin {
                        let inp = &src[s.index(b, c, 0, 0)..][..h * w];
                        for dy in 0..KERNEL {
                            for dx in 0..KERNEL {
                                gw[c * TAPS + dy * KERNEL + dx] += shifted_dot(go, inp, dy, dx, h, w);
                            }
                        }
                    }
                }
            });

        Ok(grad_input)
    }
}

#[derive(Clone, Copy)]
enum Direction {
    /// `dst[y, x] += k[dy, dx] * src[y + dy - 1, x + dx - 1]`
    Correlate,
    /// `dst[y + dy - 1, x + dx - 1] += k[dy, dx] * src[y, x]`
    Convolve,
}

#[inline]
fn accumulate_shifted<T: Scalar>(dst: &mut [T], src: &[T], kernel: &[T], h: usize, w: usize, dir: Direction) {
    for dy in 0..KERNEL {
        for dx in 0..KERNEL {
            let k = kernel[dy * KERNEL + dx];
            if k == T::zero() {
                continue;
            }
            // rows/cols of the "anchor" side that map inside the image
            let (y0, y1) = (1usize.saturating_sub(dy), (h + 1 - dy).min(h));
            let (x0, x1) = (1usize.saturating_sub(dx), (w + 1 - dx).min(w));
            if x0 >= x1 {
                continue;
            }
            for y in y0..y1 {
                let sy = y + dy - 1;
                let (d, s) = match dir {
                    Direction::Correlate => (&mut dst[y * w..][..w], &src[sy * w..][..w]),
                    Direction::Convolve => (&mut dst[sy * w..][..w], &src[y * w..][..w]),
                };
                match dir {
                    Direction::Correlate => {
                        for x in x0..x1 {
                            d[x] += k * s[x + dx - 1];
                        }
                    }
                    Direction::Convolve => {
                        for x in x0..x1 {
                            d[x + dx - 1] += k * s[x];
                        }
                    }
                }
            }
        }
    }
}

/// `sum_{y,x} g[y, x] * src[y + dy - 1, x + dx - 1]` over in-bounds positions.
#[inline]
fn shifted_dot<T: Scalar>(g: &[T], src: &[T], dy: usize, dx: usize, h: usize, w: usize) -> T {
    let (y0, y1) = (1usize.saturating_sub(dy), (h + 1 - dy).min(h));
    let (x0, x1) = (1usize.saturating_sub(dx), (w + 1 - dx).min(w));
    let mut acc = T::zero();
    for y in y0..y1 {
        let gr = &g[y * w..][..w];
        let sr = &src[(y + dy - 1) * w..][..w];
        for x in x0..x1 {
            acc += gr[x] * sr[x + dx - 1];
        }
    }
    acc
}

/// Free-function form of [`ConvLayer::forward`].
pub fn conv2d_forward<T: Scalar>(input: &Tensor4<T>, layer: &ConvLayer<T>) -> Result<Tensor4<T>> {
    layer.forward(input)
}

/// Free-function form of [`ConvLayer::backward`].
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor4<T>,
    layer: &mut ConvLayer<T>,
    grad_output: &Tensor4<T>,
) -> Result<Tensor4<T>> {
    layer.backward(input, grad_output)
}
