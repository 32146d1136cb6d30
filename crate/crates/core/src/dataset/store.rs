//! On-disk sample store.
//!
//! A store is a directory holding two files:
//!
//! * `manifest.txt`: `#`-prefixed header lines (`# patch_size N`,
//!   `# count N`), then one tab-separated record per sample:
//!   `source, variant, scale, patch_index`.
//! * `samples.bin`: one fixed-size record per manifest line, in the same
//!   order: the input patch, then the residual patch (row-major little-endian
//!   `f32`, `patch_size^2` values each), then the scale as one byte.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::ImagePlane;
use crate::train::TrainSample;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SAMPLES_FILE: &str = "samples.bin";
const MANIFEST_MAGIC: &str = "# mssr sample store v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub source: String,
    pub variant: String,
    pub scale: u8,
    pub patch_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleStore {
    pub patch_size: usize,
    pub entries: Vec<ManifestEntry>,
    pub samples: Vec<TrainSample<f32>>,
}

impl SampleStore {
    pub fn count_by_scale(&self) -> BTreeMap<u8, usize> {
        let mut m = BTreeMap::new();
        for s in &self.samples {
            *m.entry(s.scale).or_default() += 1;
        }
        m
    }
}

pub(crate) struct StoreWriter {
    dir: PathBuf,
    patch_size: usize,
    manifest: String,
    samples: BufWriter<File>,
    count: usize,
    by_scale: BTreeMap<u8, usize>,
}

impl StoreWriter {
    pub(crate) fn create(dir: &Path, patch_size: usize) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(SAMPLES_FILE);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(StoreWriter {
            dir: dir.to_path_buf(),
            patch_size,
            manifest: String::new(),
            samples: BufWriter::new(file),
            count: 0,
            by_scale: BTreeMap::new(),
        })
    }

    pub(crate) fn push(&mut self, entry: &ManifestEntry, sample: &TrainSample<f32>) -> Result<()> {
        let n = self.patch_size * self.patch_size;
        if sample.x.as_slice().len() != n || sample.scale != entry.scale {
            return Err(Error::Argument(format!(
                "sample does not match store layout ({}x{} patches)",
                self.patch_size, self.patch_size
            )));
        }
        if entry.source.contains(['\t', '\n']) || entry.variant.contains(['\t', '\n']) {
            return Err(Error::Argument(format!("unsupported characters in source name {:?}", entry.source)));
        }
        let mut buf = Vec::with_capacity(8 * n + 1);
        for &v in sample.x.as_slice().iter().chain(sample.r.as_slice()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.push(sample.scale);
        let path = self.dir.join(SAMPLES_FILE);
        self.samples.write_all(&buf).map_err(|e| Error::io(&path, e))?;
        self.manifest.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            entry.source, entry.variant, entry.scale, entry.patch_index
        ));
        self.count += 1;
        *self.by_scale.entry(sample.scale).or_default() += 1;
        Ok(())
    }

    pub(crate) fn count_by_scale(&self, scales: &[u8]) -> Vec<(u8, usize)> {
        scales
            .iter()
            .map(|s| (*s, self.by_scale.get(s).copied().unwrap_or(0)))
            .collect()
    }

    pub(crate) fn finish(mut self) -> Result<usize> {
        let path = self.dir.join(SAMPLES_FILE);
        self.samples.flush().map_err(|e| Error::io(&path, e))?;
        let header = format!(
            "{MANIFEST_MAGIC}\n# patch_size {}\n# count {}\n",
            self.patch_size, self.count
        );
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, header + &self.manifest).map_err(|e| Error::io(&path, e))?;
        Ok(self.count)
    }
}

/// Writes an in-memory store; same format as [`build_training_set`](super::build_training_set).
pub fn write_store(dir: &Path, store: &SampleStore) -> Result<()> {
    let mut w = StoreWriter::create(dir, store.patch_size)?;
    for (e, s) in store.entries.iter().zip(&store.samples) {
        w.push(e, s)?;
    }
    w.finish()?;
    Ok(())
}

fn bad(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Argument(format!("{}:{line}: {}", path.display(), message.into()))
}

pub fn read_store(dir: &Path) -> Result<SampleStore> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, MANIFEST_MAGIC)) => {}
        _ => return Err(bad(&mpath, 1, "not a sample store manifest")),
    }
    let mut patch_size = None;
    let mut count = None;
    let mut entries = Vec::new();
    for (i, line) in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            let mut kv = rest.splitn(2, ' ');
            let (k, v) = (kv.next().unwrap_or(""), kv.next().unwrap_or(""));
            let parsed = v.parse::<usize>().map_err(|_| bad(&mpath, i + 1, format!("bad header value {v:?}")));
            match k {
                "patch_size" => patch_size = Some(parsed?),
                "count" => count = Some(parsed?),
                _ => {}
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(&mpath, i + 1, "expected 4 tab-separated fields"));
        }
        entries.push(ManifestEntry {
            source: fields[0].to_string(),
            variant: fields[1].to_string(),
            scale: fields[2].parse().map_err(|_| bad(&mpath, i + 1, "bad scale"))?,
            patch_index: fields[3].parse().map_err(|_| bad(&mpath, i + 1, "bad patch index"))?,
        });
    }
    let p = patch_size.ok_or_else(|| bad(&mpath, 0, "missing patch_size header"))?;
    if count != Some(entries.len()) {
        return Err(bad(&mpath, 0, format!("header count {count:?} but {} records", entries.len())));
    }

    let spath = dir.join(SAMPLES_FILE);
    let bytes = fs::read(&spath).map_err(|e| Error::io(&spath, e))?;
    let n = p * p;
    let record = 8 * n + 1;
    if bytes.len() != record * entries.len() {
        return Err(Error::Argument(format!(
            "{}: {} bytes, expected {} records of {record} bytes",
            spath.display(),
            bytes.len(),
            entries.len()
        )));
    }
    let floats = |b: &[u8]| -> Vec<f32> {
        b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    };
    let mut samples = Vec::with_capacity(entries.len());
    for (i, (chunk, entry)) in bytes.chunks_exact(record).zip(&entries).enumerate() {
        let scale = chunk[8 * n];
        if scale != entry.scale {
            return Err(Error::Argument(format!(
                "{}: record {i} has scale {scale}, manifest says {}",
                spath.display(),
                entry.scale
            )));
        }
        let x = ImagePlane::new(p, p, floats(&chunk[..4 * n]))?;
        let r = ImagePlane::new(p, p, floats(&chunk[4 * n..8 * n]))?;
        samples.push(TrainSample::new(x, r, scale)?);
    }
    Ok(SampleStore {
        patch_size: p,
        entries,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = 3;
        let mk = |v: f32, s: u8| {
            TrainSample::new(
                ImagePlane::filled(p, p, v).unwrap(),
                ImagePlane::filled(p, p, -v / 2.0).unwrap(),
                s,
            )
            .unwrap()
        };
        let store = SampleStore {
            patch_size: p,
            entries: vec![
                ManifestEntry { source: "a.png".into(), variant: "rot0_x1".into(), scale: 2, patch_index: 0 },
                ManifestEntry { source: "a.png".into(), variant: "rot0_x1".into(), scale: 4, patch_index: 0 },
            ],
            samples: vec![mk(0.25, 2), mk(0.75, 4)],
        };
        write_store(dir.path(), &store).unwrap();
        assert_eq!(read_store(dir.path()).unwrap(), store);
        let len = fs::metadata(dir.path().join(SAMPLES_FILE)).unwrap().len();
        assert_eq!(len as usize, 2 * (2 * 9 * 4 + 1));
    }

    #[test]
    fn corrupt_store_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = SampleStore {
            patch_size: 2,
            entries: vec![ManifestEntry { source: "a".into(), variant: "v".into(), scale: 3, patch_index: 0 }],
            samples: vec![TrainSample::new(
                ImagePlane::filled(2, 2, 0.5f32).unwrap(),
                ImagePlane::filled(2, 2, 0.0f32).unwrap(),
                3,
            )
            .unwrap()],
        };
        write_store(dir.path(), &store).unwrap();
        let spath = dir.path().join(SAMPLES_FILE);
        let mut bytes = fs::read(&spath).unwrap();
        bytes.pop();
        fs::write(&spath, &bytes).unwrap();
        assert!(read_store(dir.path()).is_err());
        assert!(read_store(&dir.path().join("missing")).is_err());
    }
}
