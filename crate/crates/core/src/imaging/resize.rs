//! Bicubic resampling in the style of MATLAB's `imresize`.
//!
//! Output pixel `i` (1-based) maps to input coordinate `i / s + (1 - 1 / s) / 2`
//! where `s = out_len / in_len`. When shrinking, the kernel is stretched by
//! `1 / s` and scaled by `s` so it acts as a low-pass filter. Weights are
//! normalized to sum to one and out-of-range taps are replaced by the nearest
//! edge pixel. The two axes are separable; intermediate values are kept in
//! `f64` and only the final result is clipped to `[0, 1]`.

use crate::imaging::ImagePlane;
use crate::scalar::Scalar;

pub const BICUBIC_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
#[inline]
pub fn cubic_kernel(x: f64) -> f64 {
    let a = BICUBIC_A;
    let t = x.abs();
    if t <= 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Per-output-pixel input indices (0-based, already clamped) and weights.
struct Contributions {
    taps: usize,
    indices: Vec<usize>,
    weights: Vec<f64>,
}

fn contributions(in_len: usize, out_len: usize) -> Contributions {
    let scale = out_len as f64 / in_len as f64;
    let shrink = scale < 1.0;
    let kernel_width = if shrink { 4.0 / scale } else { 4.0 };
    let taps = kernel_width.ceil() as usize + 2;
    let mut indices = Vec::with_capacity(out_len * taps);
    let mut weights = Vec::with_capacity(out_len * taps);

    for i in 1..=out_len {
        let u = i as f64 / scale + 0.5 * (1.0 - 1.0 / scale);
        let left = (u - kernel_width / 2.0).floor() as i64;
        let start = weights.len();
        for j in 0..taps as i64 {
            let idx = left + j;
            let d = u - idx as f64;
            let w = if shrink { scale * cubic_kernel(scale * d) } else { cubic_kernel(d) };
            weights.push(w);
            indices.push((idx - 1).clamp(0, in_len as i64 - 1) as usize);
        }
        let sum: f64 = weights[start..].iter().sum();
        weights[start..].iter_mut().for_each(|w| *w /= sum);
    }
    Contributions {
        taps,
        indices,
        weights,
    }
}

/// Bicubic resize to `out_h x out_w`.
///
/// # Panics
///
/// If either output dimension is zero.
pub fn bicubic_resize<T: Scalar>(img: &ImagePlane<T>, out_h: usize, out_w: usize) -> ImagePlane<T> {
    assert!(out_h > 0 && out_w > 0, "output dimensions must be at least 1");
    let (in_h, in_w) = img.dims();
    let src: Vec<f64> = img.as_slice().iter().map(|v| v.as_f64()).collect();

    // vertical pass: in_h x in_w -> out_h x in_w
    let cy = contributions(in_h, out_h);
    let mut mid = vec![0.0f64; out_h * in_w];
    for i in 0..out_h {
        let row = &mut mid[i * in_w..][..in_w];
        for t in 0..cy.taps {
            let w = cy.weights[i * cy.taps + t];
            if w == 0.0 {
                continue;
            }
            let s = &src[cy.indices[i * cy.taps + t] * in_w..][..in_w];
            for (d, &v) in row.iter_mut().zip(s) {
                *d += w * v;
            }
        }
    }

    // horizontal pass: out_h x in_w -> out_h x out_w
    let cx = contributions(in_w, out_w);
    let mut data = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let row = &mid[i * in_w..][..in_w];
        for j in 0..out_w {
            let mut acc = 0.0;
            for t in 0..cx.taps {
                acc += cx.weights[j * cx.taps + t] * row[cx.indices[j * cx.taps + t]];
            }
            data.push(T::of(acc.clamp(0.0, 1.0)));
        }
    }
    ImagePlane::new(out_h, out_w, data).expect("dimensions checked above")
}
