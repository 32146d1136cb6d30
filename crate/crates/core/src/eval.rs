//! Benchmark evaluation: PSNR/SSIM of the network and of plain bicubic
//! interpolation, after trimming `scale` pixels from every border.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::dataset::BenchmarkPair;
use crate::error::{Error, Result};
use crate::imaging::{crop_border, quality, ImagePlane, QualityScore};
use crate::model::MssrModel;
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

pub const EVAL_HEADER: &str = "image,scale,bicubic_psnr,bicubic_ssim,mssr_psnr,mssr_ssim,seconds";
const TIMING_RUNS: usize = 3;

/// `x + F(x)` on a single plane, clipped to `[0, 1]`.
pub fn super_resolve<T: Scalar>(model: &MssrModel<T>, x: &ImagePlane<T>) -> Result<ImagePlane<T>> {
    let (h, w) = x.dims();
    let input = Tensor4::stack_planes(h, w, [x.as_slice()])?;
    let out = model.restore(&input)?;
    Ok(ImagePlane::new(h, w, out.into_vec())?.clamp_unit())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub name: String,
    pub bicubic: QualityScore,
    pub model: QualityScore,
    /// Median inference wall time over three runs; 0 when timing is off.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub scale: u8,
    pub images: Vec<ImageResult>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

impl EvalReport {
    pub fn average(&self) -> ImageResult {
        let avg = |f: &dyn Fn(&ImageResult) -> f64| mean(self.images.iter().map(f));
        ImageResult {
            name: "average".into(),
            bicubic: QualityScore {
                psnr: avg(&|r| r.bicubic.psnr),
                ssim: avg(&|r| r.bicubic.ssim),
            },
            model: QualityScore {
                psnr: avg(&|r| r.model.psnr),
                ssim: avg(&|r| r.model.ssim),
            },
            seconds: avg(&|r| r.seconds),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{EVAL_HEADER}").unwrap();
        for r in self.images.iter().chain(std::iter::once(&self.average())) {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.name, self.scale, r.bicubic.psnr, r.bicubic.ssim, r.model.psnr, r.model.ssim, r.seconds
            )
            .unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Scores every pair. Rows come out sorted by image name.
pub fn evaluate<T: Scalar>(
    model: &MssrModel<T>,
    pairs: &[BenchmarkPair<T>],
    scale: u8,
    timing: bool,
) -> Result<EvalReport> {
    let border = scale as usize;
    let mut images = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let mut times = Vec::with_capacity(TIMING_RUNS);
        let mut restored = None;
        for _ in 0..if timing { TIMING_RUNS } else { 1 } {
            let started = Instant::now();
            restored = Some(super_resolve(model, &pair.x)?);
            times.push(started.elapsed().as_secs_f64());
        }
        times.sort_by(f64::total_cmp);
        let seconds = if timing { times[times.len() / 2] } else { 0.0 };
        let restored = restored.expect("at least one run");

        let y = crop_border(&pair.y, border)?;
        images.push(ImageResult {
            name: pair.name.clone(),
            bicubic: quality(&crop_border(&pair.x, border)?, &y)?,
            model: quality(&crop_border(&restored, border)?, &y)?,
            seconds,
        });
    }
    images.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(EvalReport { scale, images })
}
