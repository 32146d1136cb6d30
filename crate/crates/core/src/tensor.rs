//! Dense 4-D tensors in batch-major NCHW order.
//!
//! Element `(b, c, y, x)` lives at `((b * channels + c) * height + y) * width + x`.
//! Every serialized form and every oracle in this crate assumes that layout.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Shape {
            batch,
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.batch * self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of elements in one `height x width` plane.
    pub const fn plane(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub const fn index(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.channels + c) * self.height + y) * self.width + x
    }

    pub fn with_channels(self, channels: usize) -> Self {
        Shape { channels, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Dimensions(format!(
                "tensor dimensions must all be at least 1, got {self}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.batch, self.channels, self.height, self.width
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(shape: Shape) -> Result<Self> {
        shape.validate()?;
        Ok(Tensor4 {
            shape,
            data: vec![T::zero(); shape.len()],
        })
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(Error::Dimensions(format!(
                "tensor of shape {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(Tensor4 { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Result<Self> {
        shape.validate()?;
        let mut data = Vec::with_capacity(shape.len());
        for b in 0..shape.batch {
            for c in 0..shape.channels {
                for y in 0..shape.height {
                    for x in 0..shape.width {
                        data.push(f(b, c, y, x));
                    }
                }
            }
        }
        Ok(Tensor4 { shape, data })
    }

    /// Stacks single-channel planes (row-major, `height * width` each) into an
    /// `N x 1 x H x W` batch.
    pub fn stack_planes<'a, I>(height: usize, width: usize, planes: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let mut data = Vec::new();
        let mut batch = 0;
        for plane in planes {
            if plane.len() != height * width {
                return Err(Error::Dimensions(format!(
                    "plane {batch} has {} values, expected {height}x{width}",
                    plane.len()
                )));
            }
            data.extend_from_slice(plane);
            batch += 1;
        }
        Self::from_vec(Shape::new(batch, 1, height, width), data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.shape.index(b, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: T) {
        let i = self.shape.index(b, c, y, x);
        self.data[i] = v;
    }

    /// The `height x width` plane for batch item `b`, channel `c`.
    pub fn plane(&self, b: usize, c: usize) -> &[T] {
        let start = self.shape.index(b, c, 0, 0);
        &self.data[start..start + self.shape.plane()]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|v| v * k)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum_squares(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.expect_shape(other.shape, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max))
    }

    pub fn cast<U: Scalar>(&self) -> Tensor4<U> {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub(crate) fn expect_shape(&self, expected: Shape, context: &'static str) -> Result<()> {
        if self.shape != expected {
            return Err(Error::shape(context, self.shape, expected));
        }
        Ok(())
    }
}
