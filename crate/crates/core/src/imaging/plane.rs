use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major single-channel image with nominal range `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImagePlane<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimensions(format!(
                "image planes must be at least 1x1, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::Dimensions(format!(
                "{height}x{width} plane needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(ImagePlane { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: T) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
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
    pub fn get(&self, y: usize, x: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ImagePlane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ImagePlane<U> {
        ImagePlane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn clamp_unit(&self) -> Self {
        self.map(|v| v.max(T::zero()).min(T::one()))
    }

    /// Rectangular sub-image starting at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(Error::Argument(format!(
                "crop {height}x{width} at ({top}, {left}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(height * width);
        for y in top..top + height {
            data.extend_from_slice(&self.data[y * self.width + left..][..width]);
        }
        Self::new(height, width, data)
    }

    /// Trims the bottom and right edges so both dimensions divide `scale`.
    pub fn modcrop(&self, scale: usize) -> Result<Self> {
        let (h, w) = (self.height - self.height % scale, self.width - self.width % scale);
        if h == 0 || w == 0 {
            return Err(Error::Argument(format!(
                "{}x{} image is smaller than scale {scale}",
                self.height, self.width
            )));
        }
        self.crop(0, 0, h, w)
    }

    /// Rotation by 90 degrees clockwise; an exact pixel permutation.
    pub fn rotate90(&self) -> Self {
        let (h, w) = (self.height, self.width);
        let mut data = Vec::with_capacity(h * w);
        for y in 0..w {
            for x in 0..h {
                data.push(self.data[(h - 1 - x) * w + y]);
            }
        }
        ImagePlane {
            height: w,
            width: h,
            data,
        }
    }

    pub fn rotate(&self, degrees: u32) -> Result<Self> {
        if degrees % 90 != 0 {
            return Err(Error::Argument(format!("rotation must be a multiple of 90, got {degrees}")));
        }
        let mut out = self.clone();
        for _ in 0..(degrees / 90) % 4 {
            out = out.rotate90();
        }
        Ok(out)
    }

    pub(crate) fn check_same_dims(&self, other: &Self, context: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Dimensions(format!(
                "{context}: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }
}

/// Removes `border` pixels from every side.
pub fn crop_border<T: Scalar>(img: &ImagePlane<T>, border: usize) -> Result<ImagePlane<T>> {
    if 2 * border >= img.height().min(img.width()) {
        return Err(Error::Argument(format!(
            "cannot crop {border} pixels from each side of a {}x{} image",
            img.height(),
            img.width()
        )));
    }
    img.crop(border, border, img.height() - 2 * border, img.width() - 2 * border)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage<T> {
    pub r: ImagePlane<T>,
    pub g: ImagePlane<T>,
    pub b: ImagePlane<T>,
}

impl<T: Scalar> RgbImage<T> {
    pub fn new(r: ImagePlane<T>, g: ImagePlane<T>, b: ImagePlane<T>) -> Result<Self> {
        r.check_same_dims(&g, "rgb planes")?;
        r.check_same_dims(&b, "rgb planes")?;
        Ok(RgbImage { r, g, b })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }

    pub fn modcrop(&self, scale: usize) -> Result<Self> {
        Ok(RgbImage {
            r: self.r.modcrop(scale)?,
            g: self.g.modcrop(scale)?,
            b: self.b.modcrop(scale)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> ImagePlane<f64> {
        ImagePlane::from_fn(h, w, |y, x| (y * w + x) as f64).unwrap()
    }

    #[test]
    fn crop_border_zero_is_identity() {
        let img = ramp(5, 7);
        assert_eq!(crop_border(&img, 0).unwrap(), img);
    }

    #[test]
    fn crop_border_keeps_interior() {
        let img = ramp(10, 10);
        let c = crop_border(&img, 2).unwrap();
        assert_eq!(c.dims(), (6, 6));
        for y in 0..6 {
            for x in 0..6 {
                assert_eq!(c.get(y, x), img.get(y + 2, x + 2));
            }
        }
    }

    #[test]
    fn over_crop_is_an_argument_error() {
        assert!(matches!(crop_border(&ramp(10, 4), 2), Err(Error::Argument(_))));
        assert!(crop_border(&ramp(10, 5), 2).is_ok());
    }

    #[test]
    fn rotations_are_permutations_of_order_four() {
        let img = ramp(4, 6);
        let r1 = img.rotate90();
        assert_eq!(r1.dims(), (6, 4));
        // top-left of the clockwise rotation is the old bottom-left
        assert_eq!(r1.get(0, 0), img.get(3, 0));
        assert_eq!(r1.get(0, 3), img.get(0, 0));
        assert_eq!(img.rotate(360).unwrap(), img);
        let sq = ramp(5, 5);
        assert_eq!(sq.rotate90().rotate90().rotate90().rotate90(), sq);
        let mut sorted = img.rotate(270).unwrap().into_vec();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, img.into_vec());
    }

    #[test]
    fn modcrop_trims_to_multiple() {
        let c = ramp(10, 11).modcrop(3).unwrap();
        assert_eq!(c.dims(), (9, 9));
        assert_eq!(c.get(8, 8), 8.0 * 11.0 + 8.0);
    }
}
