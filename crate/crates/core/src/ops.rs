//! Elementwise primitives: ReLU and tensor addition.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

pub fn relu_forward<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of ReLU. The derivative at exactly zero is taken to be zero.
pub fn relu_backward<T: Scalar>(input: &Tensor4<T>, grad_output: &Tensor4<T>) -> Result<Tensor4<T>> {
    grad_output.expect_shape(input.shape(), "relu_backward grad_output vs input")?;
    let data = input
        .as_slice()
        .iter()
        .zip(grad_output.as_slice())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor4::from_vec(input.shape(), data)
}

/// Elementwise sum. The backward map sends the incoming gradient unchanged to
/// both addends, so there is no separate `add_backward`.
pub fn add<T: Scalar>(a: &Tensor4<T>, b: &Tensor4<T>) -> Result<Tensor4<T>> {
    if a.shape() != b.shape() {
        return Err(Error::shape("add", a.shape(), b.shape()));
    }
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| x + y)
        .collect();
    Tensor4::from_vec(a.shape(), data)
}

/// In-place `acc += other`.
pub(crate) fn add_assign<T: Scalar>(acc: &mut Tensor4<T>, other: &Tensor4<T>) -> Result<()> {
    if acc.shape() != other.shape() {
        return Err(Error::shape("add_assign", acc.shape(), other.shape()));
    }
    for (a, &b) in acc.as_mut_slice().iter_mut().zip(other.as_slice()) {
        *a += b;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn t(values: &[f64]) -> Tensor4<f64> {
        Tensor4::from_vec(Shape::new(1, 1, 1, values.len()), values.to_vec()).unwrap()
    }

    #[test]
    fn relu_clamps_negatives() {
        assert_eq!(relu_forward(&t(&[-1.0, 0.0, 2.0])).as_slice(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_is_identity_on_nonnegative_input() {
        let x = t(&[0.0, 0.5, 3.0, 1e-9]);
        assert_eq!(relu_forward(&x), x);
    }

    #[test]
    fn relu_backward_gates_on_sign() {
        let g = t(&[1.0, 2.0, 3.0]);
        assert_eq!(relu_backward(&t(&[1.0, 0.1, 5.0]), &g).unwrap(), g);
        assert_eq!(
            relu_backward(&t(&[-1.0, -0.1, -5.0]), &g).unwrap().as_slice(),
            &[0.0; 3]
        );
        // subgradient at the kink
        assert_eq!(relu_backward(&t(&[0.0]), &t(&[7.0])).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn add_identities() {
        let a = t(&[1.5, -2.0, 0.25]);
        let zeros = t(&[0.0; 3]);
        assert_eq!(add(&a, &zeros).unwrap(), a);
        assert_eq!(add(&a, &a.scale(-1.0)).unwrap(), zeros);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let err = add(&t(&[1.0, 2.0]), &t(&[1.0])).unwrap_err().to_string();
        assert!(err.contains("1x1x1x2") && err.contains("1x1x1x1"), "{err}");
        assert!(relu_backward(&t(&[1.0, 2.0]), &t(&[1.0])).is_err());
    }
}
