//! ITU-R BT.601 studio-swing YCbCr, the convention of MATLAB's `rgb2ycbcr`.
//!
//! With RGB in `[0, 1]`, Y spans `[16, 235] / 255` and Cb/Cr span
//! `[16, 240] / 255`, centred on `128 / 255`.

use crate::error::Result;
use crate::imaging::{ImagePlane, RgbImage};
use crate::scalar::Scalar;

const FORWARD: [[f64; 3]; 3] = [
    [65.481, 128.553, 24.966],
    [-37.797, -74.203, 112.0],
    [112.0, -93.786, -18.214],
];
const OFFSET: [f64; 3] = [16.0, 128.0, 128.0];

pub struct YCbCr<T> {
    pub y: ImagePlane<T>,
    pub cb: ImagePlane<T>,
    pub cr: ImagePlane<T>,
}

fn inverse(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            // cofactor of (j, i)
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *v = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    inv
}

fn apply<T: Scalar>(
    a: &ImagePlane<T>,
    b: &ImagePlane<T>,
    c: &ImagePlane<T>,
    f: impl Fn([f64; 3]) -> [f64; 3],
) -> Result<[ImagePlane<T>; 3]> {
    let (h, w) = a.dims();
    let n = h * w;
    let (mut o0, mut o1, mut o2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let out = f([
            a.as_slice()[i].as_f64(),
            b.as_slice()[i].as_f64(),
            c.as_slice()[i].as_f64(),
        ]);
        o0.push(T::of(out[0]));
        o1.push(T::of(out[1]));
        o2.push(T::of(out[2]));
    }
    Ok([
        ImagePlane::new(h, w, o0)?,
        ImagePlane::new(h, w, o1)?,
        ImagePlane::new(h, w, o2)?,
    ])
}

pub fn rgb_to_ycbcr<T: Scalar>(img: &RgbImage<T>) -> YCbCr<T> {
    let [y, cb, cr] = apply(&img.r, &img.g, &img.b, |rgb| {
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = (OFFSET[k] + FORWARD[k][0] * rgb[0] + FORWARD[k][1] * rgb[1] + FORWARD[k][2] * rgb[2]) / 255.0;
        }
        out
    })
    .expect("planes share dimensions");
    YCbCr { y, cb, cr }
}

/// Exact algebraic inverse of [`rgb_to_ycbcr`]; no clipping.
pub fn ycbcr_to_rgb<T: Scalar>(img: &YCbCr<T>) -> Result<RgbImage<T>> {
    img.y.check_same_dims(&img.cb, "ycbcr planes")?;
    img.y.check_same_dims(&img.cr, "ycbcr planes")?;
    let inv = inverse(FORWARD);
    let [r, g, b] = apply(&img.y, &img.cb, &img.cr, |ycc| {
        let d = [
            ycc[0] * 255.0 - OFFSET[0],
            ycc[1] * 255.0 - OFFSET[1],
            ycc[2] * 255.0 - OFFSET[2],
        ];
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = inv[k][0] * d[0] + inv[k][1] * d[1] + inv[k][2] * d[2];
        }
        out
    })?;
    RgbImage::new(r, g, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::rng;
    use rand::Rng;

    fn solid(v: [f64; 3]) -> RgbImage<f64> {
        RgbImage::new(
            ImagePlane::filled(2, 2, v[0]).unwrap(),
            ImagePlane::filled(2, 2, v[1]).unwrap(),
            ImagePlane::filled(2, 2, v[2]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn white_and_black() {
        let w = rgb_to_ycbcr(&solid([1.0; 3]));
        assert!((w.y.get(0, 0) - 235.0 / 255.0).abs() < 1e-12);
        let b = rgb_to_ycbcr(&solid([0.0; 3]));
        assert_eq!(b.y.get(0, 0), 16.0 / 255.0);
        assert_eq!(b.cb.get(1, 1), 128.0 / 255.0);
        assert_eq!(b.cr.get(0, 1), 128.0 / 255.0);
        // greys carry no chroma
        assert!((w.cb.get(0, 0) - 128.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip() {
        let mut r = rng(3);
        let mut plane = || ImagePlane::<f64>::from_fn(6, 9, |_, _| r.random_range(0.0..=1.0)).unwrap();
        let img = RgbImage::new(plane(), plane(), plane()).unwrap();
        let back = ycbcr_to_rgb(&rgb_to_ycbcr(&img)).unwrap();
        for (p, q) in [(&img.r, &back.r), (&img.g, &back.g), (&img.b, &back.b)] {
            for (a, b) in p.as_slice().iter().zip(q.as_slice()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
