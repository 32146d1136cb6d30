use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::ConvLayer;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor4};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor<T: Scalar>(rng: &mut ChaCha8Rng, shape: Shape) -> Tensor4<T> {
    Tensor4::from_fn(shape, |_, _, _, _| T::of(rng.random_range(-1.0..1.0))).unwrap()
}

pub fn random_layer<T: Scalar>(rng: &mut ChaCha8Rng, cin: usize, cout: usize) -> ConvLayer<T> {
    let weights = (0..cin * cout * 9).map(|_| T::of(rng.random_range(-0.5..0.5))).collect();
    let bias = (0..cout).map(|_| T::of(rng.random_range(-0.2..0.2))).collect();
    ConvLayer::from_parts(cin, cout, weights, bias).unwrap()
}
