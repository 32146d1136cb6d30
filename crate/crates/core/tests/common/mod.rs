//! Fixtures and brute-force reference implementations shared by the
//! integration tests. The references favour directness over speed and share
//! no code with the library.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use mssr::imaging::{write_gray, write_rgb};
use mssr::{ConvLayer, ImagePlane, RgbImage, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth random texture in `[0, 1]`: a few random sinusoids plus noise.
pub fn texture(h: usize, w: usize, seed: u64) -> ImagePlane<f64> {
    let mut r = rng(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                r.random_range(0.02..0.4),
                r.random_range(0.02..0.4),
                r.random_range(0.0..6.3),
                r.random_range(0.05..0.2),
            )
        })
        .collect();
    let noise: Vec<f64> = (0..h * w).map(|_| r.random_range(-0.05..0.05)).collect();
    ImagePlane::from_fn(h, w, |y, x| {
        let v: f64 = waves
            .iter()
            .map(|&(fy, fx, ph, amp)| amp * (fy * y as f64 + fx * x as f64 + ph).sin())
            .sum();
        (0.5 + v + noise[y * w + x]).clamp(0.0, 1.0)
    })
    .unwrap()
}

pub fn uniform_plane(h: usize, w: usize, r: &mut ChaCha8Rng) -> ImagePlane<f64> {
    ImagePlane::from_fn(h, w, |_, _| r.random_range(0.0..1.0)).unwrap()
}

pub fn write_gray_png(dir: &Path, name: &str, h: usize, w: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    write_gray(&texture(h, w, seed), &path).unwrap();
    path
}

pub fn write_rgb_png(dir: &Path, name: &str, h: usize, w: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    let img = RgbImage::new(texture(h, w, seed), texture(h, w, seed + 1), texture(h, w, seed + 2)).unwrap();
    write_rgb(&img, &path).unwrap();
    path
}

/// Straight seven-deep loop with explicit zero padding.
pub fn conv_oracle(x: &Tensor4<f64>, layer: &ConvLayer<f64>) -> Vec<f64> {
    let s = x.shape();
    let (cin, cout) = (layer.in_channels(), layer.out_channels());
    let (h, w) = (s.height as i64, s.width as i64);
    let mut out = Vec::with_capacity(s.batch * cout * s.height * s.width);
    for b in 0..s.batch {
        for o in 0..cout {
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = layer.bias()[o];
                    for c in 0..cin {
                        for dy in 0..3i64 {
                            for dx in 0..3i64 {
                                let (iy, ix) = (y + dy - 1, xx + dx - 1);
                                if iy < 0 || ix < 0 || iy >= h || ix >= w {
                                    continue;
                                }
                                acc += layer.weight(o, c, dy as usize, dx as usize)
                                    * x.get(b, c, iy as usize, ix as usize);
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

fn keys(x: f64) -> f64 {
    let t = x.abs();
    if t < 1.0 {
        1.5 * t.powi(3) - 2.5 * t.powi(2) + 1.0
    } else if t < 2.0 {
        -0.5 * t.powi(3) + 2.5 * t.powi(2) - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Weights over all (clamped) source indices for one output coordinate,
/// built from pixel-centre geometry: output centre `(i + 0.5) / s` against
/// input centre `k + 0.5`.
fn axis_weights(i: usize, in_len: usize, out_len: usize) -> Vec<f64> {
    let s = out_len as f64 / in_len as f64;
    let centre = (i as f64 + 0.5) / s;
    let reach = if s < 1.0 { 2.0 / s } else { 2.0 } + 1.0;
    let mut wts = vec![0.0; in_len];
    let lo = (centre - reach).floor() as i64 - 1;
    let hi = (centre + reach).ceil() as i64 + 1;
    for k in lo..=hi {
        let d = centre - (k as f64 + 0.5);
        let wt = if s < 1.0 { s * keys(s * d) } else { keys(d) };
        wts[k.clamp(0, in_len as i64 - 1) as usize] += wt;
    }
    let total: f64 = wts.iter().sum();
    wts.iter().map(|v| v / total).collect()
}

/// Direct 2-D evaluation of the antialiased bicubic resampler.
pub fn bicubic_oracle(img: &ImagePlane<f64>, out_h: usize, out_w: usize) -> Vec<f64> {
    let (h, w) = img.dims();
    let wy: Vec<Vec<f64>> = (0..out_h).map(|i| axis_weights(i, h, out_h)).collect();
    let wx: Vec<Vec<f64>> = (0..out_w).map(|j| axis_weights(j, w, out_w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for row in &wy {
        for col in &wx {
            let mut acc = 0.0;
            for (k, a) in row.iter().enumerate() {
                for (l, b) in col.iter().enumerate() {
                    acc += a * b * img.get(k, l);
                }
            }
            out.push(acc.clamp(0.0, 1.0));
        }
    }
    out
}

fn to_u8(v: f64) -> f64 {
    let s = v * 255.0;
    let r = if s >= 0.0 { (s + 0.5).floor() } else { (s - 0.5).ceil() };
    r.clamp(0.0, 255.0)
}

pub fn psnr_oracle(a: &ImagePlane<f64>, b: &ImagePlane<f64>) -> f64 {
    let (h, w) = a.dims();
    let mut sse = 0.0;
    for y in 0..h {
        for x in 0..w {
            let d = to_u8(a.get(y, x)) - to_u8(b.get(y, x));
            sse += d * d;
        }
    }
    if sse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (255.0f64 * 255.0 / (sse / (h * w) as f64)).log10()
}

/// Mean SSIM, every window evaluated from its own 11x11 neighbourhood.
pub fn ssim_oracle(a: &ImagePlane<f64>, b: &ImagePlane<f64>) -> f64 {
    let (h, w) = a.dims();
    let mut g = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut sum = 0.0;
    let mut count = 0;
    for y in 0..=h - 11 {
        for x in 0..=w - 11 {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let wt = g[i][j] / total;
                    let p = to_u8(a.get(y + i, x + j));
                    let q = to_u8(b.get(y + i, x + j));
                    ma += wt * p;
                    mb += wt * q;
                    saa += wt * p * p;
                    sbb += wt * q * q;
                    sab += wt * p * q;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    sum / count as f64
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
