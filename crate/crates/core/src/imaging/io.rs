//! PNG and PGM/PPM reading and writing.
//!
//! Any decodable file is accepted on input; output format follows the file
//! extension. Pixel values are stored as 8-bit, quantized the same way the
//! metrics quantize.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, GrayImage, ImageEncoder, ImageReader};

use crate::error::{Error, Result};
use crate::imaging::{quantize_u8, rgb_to_ycbcr, ImagePlane, RgbImage};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum DecodedImage<T> {
    Gray(ImagePlane<T>),
    Rgb(RgbImage<T>),
}

impl<T: Scalar> DecodedImage<T> {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            DecodedImage::Gray(p) => p.dims(),
            DecodedImage::Rgb(img) => img.dims(),
        }
    }

    /// Grayscale images are already luminance; color images go through YCbCr.
    pub fn luminance(&self) -> ImagePlane<T> {
        match self {
            DecodedImage::Gray(p) => p.clone(),
            DecodedImage::Rgb(img) => rgb_to_ycbcr(img).y,
        }
    }
}

fn image_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_image<T: Scalar>(path: impl AsRef<Path>) -> Result<DecodedImage<T>> {
    let path = path.as_ref();
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| image_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb32f();
        let mut planes: [Vec<T>; 3] = Default::default();
        for px in rgb.pixels() {
            for (k, plane) in planes.iter_mut().enumerate() {
                plane.push(T::of(px.0[k] as f64));
            }
        }
        let [r, g, b] = planes;
        Ok(DecodedImage::Rgb(RgbImage::new(
            ImagePlane::new(h, w, r)?,
            ImagePlane::new(h, w, g)?,
            ImagePlane::new(h, w, b)?,
        )?))
    } else {
        let gray = img.to_luma32f();
        let data = gray.pixels().map(|p| T::of(p.0[0] as f64)).collect();
        Ok(DecodedImage::Gray(ImagePlane::new(h, w, data)?))
    }
}

/// Luminance of an image file, quantized to 8 bits as benchmark tooling does
/// when it converts `uint8` RGB to YCbCr.
pub fn read_luminance<T: Scalar>(path: impl AsRef<Path>) -> Result<ImagePlane<T>> {
    let y = read_image::<T>(path)?.luminance();
    Ok(y.map(|v| T::of((v.as_f64() * 255.0).round().clamp(0.0, 255.0) / 255.0)))
}

pub fn write_gray<T: Scalar>(img: &ImagePlane<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = img.dims();
    let buf = GrayImage::from_raw(w as u32, h as u32, quantize_u8(img)).expect("buffer sized to image");
    DynamicImage::ImageLuma8(buf).save(path).map_err(|e| image_err(path, e))
}

pub fn write_rgb<T: Scalar>(img: &RgbImage<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = img.dims();
    let (r, g, b) = (quantize_u8(&img.r), quantize_u8(&img.g), quantize_u8(&img.b));
    let mut raw = Vec::with_capacity(3 * h * w);
    for i in 0..h * w {
        raw.extend_from_slice(&[r[i], g[i], b[i]]);
    }
    let buf = image::RgbImage::from_raw(w as u32, h as u32, raw).expect("buffer sized to image");
    DynamicImage::ImageRgb8(buf).save(path).map_err(|e| image_err(path, e))
}

/// Plain-text (P2) PGM, handy for fixtures that oracle scripts read directly.
pub fn write_pnm_ascii<T: Scalar>(img: &ImagePlane<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = img.dims();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Ascii))
        .write_image(&quantize_u8(img), w as u32, h as u32, ExtendedColorType::L8)
        .map_err(|e| image_err(path, e))
}
