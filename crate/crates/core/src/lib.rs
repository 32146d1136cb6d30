//! Multi-scale residual super-resolution network, trained and evaluated from
//! scratch on the CPU.
//!
//! Network math is generic over [`Scalar`] (`f32` for training and inference,
//! `f64` for gradient checking); the aliases below pin the common choices.

pub mod cli;
pub mod conv;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod imaging;
pub mod model;
pub mod ops;
pub mod scalar;
pub mod tensor;
pub mod train;

#[cfg(test)]
mod test_support;

pub use conv::{conv2d_backward, conv2d_forward, ConvLayer};
pub use error::{Error, Result};
pub use imaging::{ImagePlane, RgbImage};
pub use model::{Hyperparams, MssrModel};
pub use ops::{add, relu_backward, relu_forward};
pub use scalar::Scalar;
pub use tensor::{Shape, Tensor4};
pub use train::{AdamState, TrainConfig, TrainSample};

pub type Tensor = Tensor4<f32>;
pub type Tensor64 = Tensor4<f64>;
pub type Layer = ConvLayer<f32>;
pub type Layer64 = ConvLayer<f64>;
pub type Model = MssrModel<f32>;
pub type Model64 = MssrModel<f64>;
pub type Plane = ImagePlane<f32>;
pub type Plane64 = ImagePlane<f64>;
pub type Sample = TrainSample<f32>;
pub type Sample64 = TrainSample<f64>;
pub type Adam = AdamState<f32>;
pub type Adam64 = AdamState<f64>;
