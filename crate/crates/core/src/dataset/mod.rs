//! Training-set construction and benchmark loading.
//!
//! Every image is reduced to its 8-bit luminance, augmented with rotations and
//! downscaled copies, and each variant is turned into aligned 41x41 patches of
//! bicubic-interpolated input and residual for every up-scale factor.

mod store;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, read_luminance, ImagePlane};
use crate::scalar::Scalar;
use crate::train::TrainSample;

pub use store::{read_store, write_store, ManifestEntry, SampleStore, MANIFEST_FILE, SAMPLES_FILE};

/// File extensions picked up when scanning image directories.
pub const IMAGE_EXTENSIONS: [&str; 5] = ["png", "pgm", "ppm", "pnm", "pbm"];

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    pub rotations: Vec<u32>,
    pub downscale_factors: Vec<f64>,
    pub rotate: bool,
    pub downscale: bool,
    /// Downscaled variants smaller than this in either dimension are dropped.
    pub min_size: usize,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            rotations: vec![90, 180, 270],
            downscale_factors: vec![0.9, 0.8, 0.7, 0.6],
            rotate: true,
            downscale: true,
            min_size: 41,
        }
    }
}

impl AugmentSpec {
    pub fn none() -> Self {
        AugmentSpec {
            rotate: false,
            downscale: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.rotations.iter().find(|&&r| r % 90 != 0) {
            return Err(Error::Argument(format!("rotation {r} is not a multiple of 90")));
        }
        if let Some(f) = self.downscale_factors.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::Argument(format!("downscale factor {f} outside (0, 1]")));
        }
        Ok(())
    }

    fn rotation_list(&self) -> Vec<u32> {
        let mut v = vec![0];
        if self.rotate {
            v.extend(self.rotations.iter().copied().filter(|&r| r % 360 != 0));
        }
        v
    }

    fn factor_list(&self) -> Vec<f64> {
        let mut v = vec![1.0];
        if self.downscale {
            v.extend(self.downscale_factors.iter().copied().filter(|&f| f != 1.0));
        }
        v
    }
}

/// Floor of `len * factor`, tolerant of products like `0.7 * 100` landing a
/// hair below an integer.
pub fn scaled_len(len: usize, factor: f64) -> usize {
    (len as f64 * factor + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant<T> {
    pub rotation: u32,
    pub factor: f64,
    pub image: ImagePlane<T>,
}

impl<T> Variant<T> {
    pub fn label(&self) -> String {
        format!("rot{}_x{}", self.rotation, self.factor)
    }
}

/// The original plus every rotation, each at full size and at every
/// downscale factor.
pub fn augment<T: Scalar>(img: &ImagePlane<T>, spec: &AugmentSpec) -> Result<Vec<Variant<T>>> {
    spec.validate()?;
    let mut out = Vec::new();
    for rotation in spec.rotation_list() {
        let base = img.rotate(rotation)?;
        for factor in spec.factor_list() {
            let image = if factor == 1.0 {
                base.clone()
            } else {
                let (h, w) = (scaled_len(base.height(), factor), scaled_len(base.width(), factor));
                if h < spec.min_size || w < spec.min_size || h == 0 || w == 0 {
                    continue;
                }
                bicubic_resize(&base, h, w)
            };
            out.push(Variant {
                rotation,
                factor,
                image,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSpec {
    pub scales: Vec<u8>,
    pub patch_size: usize,
    /// Must equal `patch_size`: patches never overlap.
    pub stride: usize,
}

impl Default for PairSpec {
    fn default() -> Self {
        PairSpec {
            scales: vec![2, 3, 4],
            patch_size: 41,
            stride: 41,
        }
    }
}

impl PairSpec {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.stride != self.patch_size {
            return Err(Error::Argument(format!(
                "patches must be non-overlapping and non-empty (patch {}, stride {})",
                self.patch_size, self.stride
            )));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !crate::train::SCALES.contains(s)) {
            return Err(Error::Argument(format!("scales must be drawn from 2, 3, 4: {:?}", self.scales)));
        }
        Ok(())
    }

    /// Patches produced from an `h x w` image at `scale`.
    pub fn patch_count(&self, h: usize, w: usize, scale: u8) -> usize {
        let s = scale as usize;
        ((h - h % s) / self.patch_size) * ((w - w % s) / self.patch_size)
    }
}

/// `hr` cropped to a multiple of `scale`, shrunk by `scale` and enlarged back.
/// Returns `(cropped hr, interpolated input)`.
pub fn degrade<T: Scalar>(hr: &ImagePlane<T>, scale: u8) -> Result<(ImagePlane<T>, ImagePlane<T>)> {
    let s = scale as usize;
    let crop = hr.modcrop(s)?;
    let (h, w) = crop.dims();
    let lr = bicubic_resize(&crop, h / s, w / s);
    let x = bicubic_resize(&lr, h, w);
    Ok((crop, x))
}

/// Aligned, non-overlapping patches of input and residual, scales in the
/// order given by `spec` and tiles in row-major order within each scale.
pub fn make_pairs<T: Scalar>(hr: &ImagePlane<T>, spec: &PairSpec) -> Result<Vec<TrainSample<T>>> {
    spec.validate()?;
    let p = spec.patch_size;
    let mut out = Vec::new();
    for &scale in &spec.scales {
        let s = scale as usize;
        if hr.height() < s.max(p) || hr.width() < s.max(p) {
            continue;
        }
        let (crop, x) = degrade(hr, scale)?;
        let residual = ImagePlane::new(
            crop.height(),
            crop.width(),
            crop.as_slice().iter().zip(x.as_slice()).map(|(&y, &xi)| y - xi).collect(),
        )?;
        for ty in 0..crop.height() / p {
            for tx in 0..crop.width() / p {
                out.push(TrainSample::new(
                    x.crop(ty * p, tx * p, p, p)?,
                    residual.crop(ty * p, tx * p, p, p)?,
                    scale,
                )?);
            }
        }
    }
    Ok(out)
}

/// Image files directly inside `dir`, sorted by path.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let known = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && known {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub images_used: usize,
    pub warnings: usize,
    pub samples: usize,
    pub count_by_scale: Vec<(u8, usize)>,
}

const BUILD_CHUNK: usize = 16;

/// Runs augmentation and pair generation over every image in `dirs` and
/// writes the sample store to `out_dir`. Unreadable images are logged and
/// skipped; the manifest order is canonical (sorted path, variant, scale,
/// patch) regardless of how work is scheduled.
pub fn build_training_set(
    dirs: &[PathBuf],
    augment_spec: &AugmentSpec,
    pair_spec: &PairSpec,
    out_dir: &Path,
) -> Result<BuildReport> {
    augment_spec.validate()?;
    pair_spec.validate()?;
    let mut files = Vec::new();
    for dir in dirs {
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "image directory does not exist"),
            ));
        }
        files.extend(list_images(dir)?);
    }
    files.sort();

    let mut writer = store::StoreWriter::create(out_dir, pair_spec.patch_size)?;
    let mut warnings = 0;
    let mut images_used = 0;
    for chunk in files.chunks(BUILD_CHUNK) {
        let results: Vec<_> = chunk
            .par_iter()
            .map(|path| -> Result<Vec<(ManifestEntry, TrainSample<f32>)>> {
                let hr = read_luminance::<f32>(path)?;
                let mut records = Vec::new();
                for variant in augment(&hr, augment_spec)? {
                    let label = variant.label();
                    let samples = make_pairs(&variant.image, pair_spec)?;
                    let mut index = std::collections::BTreeMap::<u8, usize>::new();
                    for sample in samples {
                        let k = index.entry(sample.scale).or_default();
                        records.push((
                            ManifestEntry {
                                source: path.display().to_string(),
                                variant: label.clone(),
                                scale: sample.scale,
                                patch_index: *k,
                            },
                            sample,
                        ));
                        *k += 1;
                    }
                }
                Ok(records)
            })
            .collect();
        for (path, result) in chunk.iter().zip(results) {
            match result {
                Ok(records) => {
                    images_used += 1;
                    for (entry, sample) in records {
                        writer.push(&entry, &sample)?;
                    }
                }
                Err(e) => {
                    warnings += 1;
                    log::warn!("skipping {}: {e}", path.display());
                }
            }
        }
    }
    if images_used == 0 {
        return Err(Error::Argument(format!(
            "no usable images found in {}",
            dirs.iter().map(|d| d.display().to_string()).collect::<Vec<_>>().join(", ")
        )));
    }
    let count_by_scale = writer.count_by_scale(&pair_spec.scales);
    let samples = writer.finish()?;
    Ok(BuildReport {
        images_used,
        warnings,
        samples,
        count_by_scale,
    })
}

/// One benchmark image: interpolated input `x` and ground truth `y`, both
/// luminance and the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPair<T> {
    pub name: String,
    pub x: ImagePlane<T>,
    pub y: ImagePlane<T>,
}

/// Loads every image in `dir` (sorted by file name) as a full-image pair.
pub fn load_benchmark<T: Scalar>(dir: &Path, scale: u8) -> Result<Vec<BenchmarkPair<T>>> {
    if !crate::train::SCALES.contains(&scale) {
        return Err(Error::Argument(format!("scale must be 2, 3 or 4, got {scale}")));
    }
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "benchmark directory does not exist"),
        ));
    }
    let mut pairs = Vec::new();
    for path in list_images(dir)? {
        let loaded = read_luminance::<T>(&path).and_then(|y| degrade(&y, scale));
        match loaded {
            Ok((y, x)) => pairs.push(BenchmarkPair {
                name: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                x,
                y,
            }),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    if pairs.is_empty() {
        return Err(Error::Argument(format!("no usable images in {}", dir.display())));
    }
    Ok(pairs)
}
