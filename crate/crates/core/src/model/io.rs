//! Binary model files.
//!
//! ```text
//! "MSSR"                       4 bytes
//! format version               u16
//! N_L, N_S, N_r, width         u16 each
//! per layer, canonical order:
//!     out, in                  u16 each
//!     weights                  out*in*9 f32, layout out x in x 3 x 3
//!     bias                     out f32
//! ```
//!
//! All integers and floats are little-endian. Parameters are stored as 32-bit
//! floats whatever the in-memory scalar type.

use std::fs;
use std::path::Path;

use crate::conv::{ConvLayer, TAPS};
use crate::error::{Error, Result};
use crate::model::{Hyperparams, MssrModel};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"MSSR";
pub const FORMAT_VERSION: u16 = 1;

pub fn write_model<T: Scalar>(model: &MssrModel<T>) -> Vec<u8> {
    let h = model.hyperparams();
    let mut buf = Vec::with_capacity(16 + 4 * model.parameter_count() + 4 * h.layer_count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [h.long_depth, h.short_depth, h.recon_depth, h.width] {
        buf.extend_from_slice(&(v as u16).to_le_bytes());
    }
    for layer in model.layers() {
        buf.extend_from_slice(&(layer.out_channels() as u16).to_le_bytes());
        buf.extend_from_slice(&(layer.in_channels() as u16).to_le_bytes());
        for &v in layer.weights().iter().chain(layer.bias()) {
            buf.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    buf
}

pub fn save_model<T: Scalar>(model: &MssrModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<MssrModel<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!(
                    "truncated while reading {what}: need {n} bytes, {} left",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn f32s<T: Scalar>(&mut self, n: usize, what: &str) -> Result<Vec<T>> {
        let b = self.take(4 * n, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect())
    }
}

pub fn read_model<T: Scalar>(bytes: &[u8]) -> Result<MssrModel<T>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {magic:?}, expected \"MSSR\""),
        });
    }
    let version_at = cur.pos as u64;
    let version = cur.u16("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format {
            offset: version_at,
            message: format!("unsupported format version {version}, expected {FORMAT_VERSION}"),
        });
    }
    let header_at = cur.pos as u64;
    let hyper = Hyperparams {
        long_depth: cur.u16("N_L")? as usize,
        short_depth: cur.u16("N_S")? as usize,
        recon_depth: cur.u16("N_r")? as usize,
        width: cur.u16("width")? as usize,
    };
    hyper.validate().map_err(|e| Error::ShapeValidation {
        offset: header_at,
        message: e.to_string(),
    })?;

    let mut layers = Vec::with_capacity(hyper.layer_count());
    for (i, (out, cin)) in hyper.layer_shapes().into_iter().enumerate() {
        let at = cur.pos as u64;
        let o = cur.u16("layer output channels")? as usize;
        let c = cur.u16("layer input channels")? as usize;
        if (o, c) != (out, cin) {
            return Err(Error::ShapeValidation {
                offset: at,
                message: format!(
                    "layer {i} is stored as {c}->{o} but the header implies {cin}->{out}"
                ),
            });
        }
        let weights = cur.f32s(o * c * TAPS, "layer weights")?;
        let bias = cur.f32s(o, "layer bias")?;
        layers.push(ConvLayer::from_parts(c, o, weights, bias)?);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format {
            offset: cur.pos as u64,
            message: format!("{} trailing bytes after last layer", bytes.len() - cur.pos),
        });
    }
    MssrModel::from_layers(hyper, &mut layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_model() -> MssrModel<f32> {
        MssrModel::he_init(Hyperparams::default(), 42).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = default_model();
        let bytes = write_model(&m);
        let back: MssrModel<f32> = read_model(&bytes).unwrap();
        assert_eq!(back.hyperparams(), m.hyperparams());
        let (a, b) = (m.flatten_params(), back.flatten_params());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(write_model(&back), bytes);
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mssr");
        let m = MssrModel::<f32>::he_init(Hyperparams::default().with_width(5), 1).unwrap();
        save_model(&m, &path).unwrap();
        let back: MssrModel<f32> = load_model(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn file_length_matches_parameter_count() {
        let m = default_model();
        let h = m.hyperparams();
        assert_eq!(write_model(&m).len(), 14 + 4 * h.layer_count() + 4 * 665_921);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = write_model(&MssrModel::<f32>::he_init(Hyperparams::default().with_width(3), 2).unwrap());
        for cut in [0, 3, 5, 13, 20, bytes.len() - 1] {
            match read_model::<f32>(&bytes[..cut]) {
                Err(Error::Format { offset, .. }) => assert!(offset as usize <= cut),
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = write_model(&MssrModel::<f32>::zeros(Hyperparams::default().with_width(2)).unwrap());
        bytes[4] = 9;
        assert!(matches!(read_model::<f32>(&bytes), Err(Error::Format { offset: 4, .. })));
        bytes[0] = b'X';
        assert!(matches!(read_model::<f32>(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn altered_header_fails_shape_validation() {
        let bytes = write_model(&MssrModel::<f32>::zeros(Hyperparams::default().with_width(4)).unwrap());
        // width 4 -> 5
        let mut b = bytes.clone();
        b[12] = 5;
        assert!(matches!(read_model::<f32>(&b), Err(Error::ShapeValidation { .. })));
        // N_L 9 -> 8: the reconstruction layers no longer line up
        let mut b = bytes.clone();
        b[6] = 8;
        assert!(matches!(read_model::<f32>(&b), Err(Error::ShapeValidation { .. })));
        // N_S >= N_L is not a valid architecture
        let mut b = bytes;
        b[8] = 9;
        assert!(matches!(read_model::<f32>(&b), Err(Error::ShapeValidation { offset: 6, .. })));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = write_model(&MssrModel::<f32>::zeros(Hyperparams::default().with_width(2)).unwrap());
        bytes.push(0);
        assert!(matches!(read_model::<f32>(&bytes), Err(Error::Format { .. })));
    }
}
