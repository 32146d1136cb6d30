//! PSNR and SSIM on 8-bit-quantized planes.

use crate::error::{Error, Result};
use crate::imaging::ImagePlane;
use crate::scalar::Scalar;

/// Side of the square Gaussian SSIM window.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const PEAK: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScore {
    /// Decibels; `+inf` for identical images.
    pub psnr: f64,
    pub ssim: f64,
}

/// Scales to `[0, 255]` and rounds half away from zero, clamping out-of-range values.
pub fn quantize_u8<T: Scalar>(img: &ImagePlane<T>) -> Vec<u8> {
    img.as_slice()
        .iter()
        .map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

fn check_dims<T: Scalar>(a: &ImagePlane<T>, b: &ImagePlane<T>) -> Result<()> {
    a.check_same_dims(b, "image quality inputs differ in size")
}

pub fn psnr<T: Scalar>(a: &ImagePlane<T>, b: &ImagePlane<T>) -> Result<f64> {
    check_dims(a, b)?;
    let (qa, qb) = (quantize_u8(a), quantize_u8(b));
    let sse: u64 = qa
        .iter()
        .zip(&qb)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / qa.len() as f64;
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

fn gaussian_1d() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut g = [0.0; SSIM_WINDOW];
    for (i, v) in g.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Separable "valid" Gaussian filter: output is `(h - 10) x (w - 10)`.
fn filter_valid(src: &[f64], h: usize, w: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|k| g[k] * src[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|k| g[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5) placed only where it
/// fits entirely inside the image.
pub fn ssim<T: Scalar>(a: &ImagePlane<T>, b: &ImagePlane<T>) -> Result<f64> {
    check_dims(a, b)?;
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Argument(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let qa: Vec<f64> = quantize_u8(a).into_iter().map(f64::from).collect();
    let qb: Vec<f64> = quantize_u8(b).into_iter().map(f64::from).collect();
    let g = gaussian_1d();
    let c1 = (K1 * PEAK).powi(2);
    let c2 = (K2 * PEAK).powi(2);

    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(&qa, h, w, &g);
    let mu_b = filter_valid(&qb, h, w, &g);
    let aa = filter_valid(&prod(&qa, &qa), h, w, &g);
    let bb = filter_valid(&prod(&qb, &qb), h, w, &g);
    let ab = filter_valid(&prod(&qa, &qb), h, w, &g);

    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = aa[i] - ma * ma;
        let var_b = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    Ok(total / n as f64)
}

pub fn quality<T: Scalar>(a: &ImagePlane<T>, b: &ImagePlane<T>) -> Result<QualityScore> {
    Ok(QualityScore {
        psnr: psnr(a, b)?,
        ssim: ssim(a, b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::rng;
    use rand::Rng;

    fn random_plane(seed: u64, h: usize, w: usize) -> ImagePlane<f64> {
        let mut r = rng(seed);
        ImagePlane::from_fn(h, w, |_, _| r.random_range(0.0..=1.0)).unwrap()
    }

    #[test]
    fn identical_images() {
        let a = random_plane(1, 16, 20);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn constant_offset_psnr() {
        let a = ImagePlane::<f64>::from_fn(12, 12, |y, x| ((y * 12 + x) % 200) as f64 / 255.0).unwrap();
        let b = a.map(|v| v + 5.0 / 255.0);
        let p = psnr(&a, &b).unwrap();
        assert!((p - 20.0 * (255.0f64 / 5.0).log10()).abs() < 1e-9);
        assert!((p - 34.15).abs() < 0.01);
    }

    #[test]
    fn quantization_rounds_half_away_from_zero() {
        let img = ImagePlane::<f64>::new(1, 4, vec![0.5 / 255.0, 1.5 / 255.0, -0.2, 1.3]).unwrap();
        assert_eq!(quantize_u8(&img), vec![1, 2, 0, 255]);
    }

    #[test]
    fn symmetric() {
        let (a, b) = (random_plane(2, 14, 17), random_plane(3, 14, 17));
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn inverted_binary_structure_scores_low() {
        let a = ImagePlane::<f64>::from_fn(24, 24, |y, x| ((y / 3 + x / 2) % 2) as f64).unwrap();
        let inv = a.map(|v| 1.0 - v);
        assert!(ssim(&a, &inv).unwrap() < 0.1);
    }

    #[test]
    fn errors() {
        let a = random_plane(4, 10, 12);
        assert!(matches!(ssim(&a, &a), Err(Error::Argument(_))));
        let b = random_plane(5, 12, 10);
        assert!(psnr(&a, &b).is_err());
    }
}
