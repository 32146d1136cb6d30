mod common;

use common::*;
use mssr::imaging::{bicubic_resize, psnr, ssim};
use mssr::{ConvLayer, ImagePlane, Shape, Tensor4};
use rand::Rng;

fn random_layer(r: &mut rand_chacha::ChaCha8Rng, cin: usize, cout: usize) -> ConvLayer<f64> {
    let w = (0..cin * cout * 9).map(|_| r.random_range(-1.0..1.0)).collect();
    let b = (0..cout).map(|_| r.random_range(-0.5..0.5)).collect();
    ConvLayer::from_parts(cin, cout, w, b).unwrap()
}

#[test]
fn conv_matches_direct_loops() {
    for seed in 0..25 {
        let mut r = rng(seed);
        let shape = Shape::new(
            r.random_range(1..3),
            r.random_range(1..5),
            r.random_range(1..12),
            r.random_range(1..12),
        );
        let cout = r.random_range(1..5);
        let layer = random_layer(&mut r, shape.channels, cout);
        let x = Tensor4::from_fn(shape, |_, _, _, _| r.random_range(-1.0..1.0)).unwrap();
        let got = layer.forward(&x).unwrap();
        let err = max_abs_diff(got.as_slice(), &conv_oracle(&x, &layer));
        assert!(err < 1e-6, "seed {seed}: {err}");
    }
}

#[test]
fn conv_f32_tracks_f64_oracle() {
    let mut r = rng(99);
    let layer = random_layer(&mut r, 3, 4);
    let x = Tensor4::from_fn(Shape::new(1, 3, 9, 7), |_, _, _, _| r.random_range(-1.0..1.0)).unwrap();
    let got = ConvLayer::<f32>::from_parts(
        3,
        4,
        layer.weights().iter().map(|&v| v as f32).collect(),
        layer.bias().iter().map(|&v| v as f32).collect(),
    )
    .unwrap()
    .forward(&x.cast::<f32>())
    .unwrap();
    let got: Vec<f64> = got.as_slice().iter().map(|&v| v as f64).collect();
    assert!(max_abs_diff(&got, &conv_oracle(&x, &layer)) < 1e-5);
}

#[test]
fn bicubic_matches_direct_kernel() {
    for seed in 0..25 {
        let mut r = rng(1000 + seed);
        let (h, w) = (r.random_range(3..24), r.random_range(3..24));
        let img = uniform_plane(h, w, &mut r);
        let (oh, ow) = (r.random_range(1..40), r.random_range(1..40));
        let got = bicubic_resize(&img, oh, ow);
        let err = max_abs_diff(got.as_slice(), &bicubic_oracle(&img, oh, ow));
        assert!(err < 1e-6, "seed {seed} {h}x{w} -> {oh}x{ow}: {err}");
    }
}

#[test]
fn bicubic_integer_factors() {
    let mut r = rng(5);
    let img = uniform_plane(24, 36, &mut r);
    for s in [2, 3, 4] {
        let down = bicubic_resize(&img, 24 / s, 36 / s);
        assert!(max_abs_diff(down.as_slice(), &bicubic_oracle(&img, 24 / s, 36 / s)) < 1e-6);
        let up = bicubic_resize(&down, 24, 36);
        assert!(max_abs_diff(up.as_slice(), &bicubic_oracle(&down, 24, 36)) < 1e-6);
    }
}

#[test]
fn psnr_matches_double_loop() {
    for seed in 0..25 {
        let mut r = rng(2000 + seed);
        let (h, w) = (r.random_range(1..30), r.random_range(1..30));
        let a = uniform_plane(h, w, &mut r);
        let amp = r.random_range(0.001..0.3);
        let b = ImagePlane::from_fn(h, w, |y, x| (a.get(y, x) + r.random_range(-amp..amp)).clamp(0.0, 1.0)).unwrap();
        let (got, want) = (psnr(&a, &b).unwrap(), psnr_oracle(&a, &b));
        assert!(got == want || (got - want).abs() < 1e-9, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn ssim_matches_windowed_definition() {
    for seed in 0..25 {
        let mut r = rng(3000 + seed);
        let (h, w) = (r.random_range(11..28), r.random_range(11..28));
        let a = texture(h, w, seed);
        let amp = r.random_range(0.01..0.4);
        let b = ImagePlane::from_fn(h, w, |y, x| (a.get(y, x) + r.random_range(-amp..amp)).clamp(0.0, 1.0)).unwrap();
        let (got, want) = (ssim(&a, &b).unwrap(), ssim_oracle(&a, &b));
        assert!((got - want).abs() < 1e-6, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn known_values() {
    let a = ImagePlane::filled(12, 12, 100.0 / 255.0).unwrap();
    let b = ImagePlane::filled(12, 12, 110.0 / 255.0).unwrap();
    // mse = 100
    let want = 10.0 * (255.0f64 * 255.0 / 100.0).log10();
    assert!((psnr(&a, &b).unwrap() - want).abs() < 1e-12);
    assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
}
