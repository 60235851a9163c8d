//! `.s2dt` tensor files.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "S2DT"
//! 4       1           version (1)
//! 5       1           dtype (1 = float32 little-endian)
//! 6       1           ndims
//! 7       4 * ndims   dims, u32 little-endian, outermost first
//! ...     4 * prod    payload, row-major (last dim fastest)
//! ```
//!
//! A spiral image is stored with dims `(rows, cols)`, a 2D view likewise,
//! and a cube as `(side, side, side)` whose innermost dimension is x.

use std::fs;
use std::path::{Path, PathBuf};

pub const MAGIC: &[u8; 4] = b"S2DT";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum S2dtError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {0:?}, expected \"S2DT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(u8),
    #[error("truncated at offset {offset}: needed {needed} more bytes for {what}")]
    Truncated {
        offset: usize,
        needed: usize,
        what: &'static str,
    },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("shape {dims:?} holds {expected} values but data has {actual}")]
    ShapeMismatch {
        dims: Vec<usize>,
        expected: usize,
        actual: usize,
    },
}

/// Float32 tensor as stored in a `.s2dt` file.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, S2dtError> {
        let expected: usize = dims.iter().product();
        if expected != data.len() || dims.len() > u8::MAX as usize {
            return Err(S2dtError::ShapeMismatch {
                dims,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(DTYPE_F32);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, S2dtError> {
        let mut pos = 0usize;
        let mut take = |n: usize, what: &'static str| -> Result<&[u8], S2dtError> {
            if bytes.len() - pos < n {
                return Err(S2dtError::Truncated {
                    offset: bytes.len(),
                    needed: n - (bytes.len() - pos),
                    what,
                });
            }
            let s = &bytes[pos..pos + n];
            pos += n;
            Ok(s)
        };
        let magic: [u8; 4] = take(4, "magic")?.try_into().expect("4 bytes");
        if &magic != MAGIC {
            return Err(S2dtError::BadMagic(magic));
        }
        let version = take(1, "version")?[0];
        if version != VERSION {
            return Err(S2dtError::UnsupportedVersion(version));
        }
        let dtype = take(1, "dtype")?[0];
        if dtype != DTYPE_F32 {
            return Err(S2dtError::UnsupportedDtype(dtype));
        }
        let ndims = take(1, "ndims")?[0] as usize;
        let dims: Vec<usize> = take(4 * ndims, "dims")?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let count: usize = dims.iter().product();
        let data = take(4 * count, "payload")?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if pos != bytes.len() {
            return Err(S2dtError::TrailingBytes(bytes.len() - pos));
        }
        Ok(Self { dims, data })
    }
}

pub fn write_s2dt(path: &Path, tensor: &Tensor) -> Result<(), S2dtError> {
    fs::write(path, tensor.to_bytes()).map_err(|source| S2dtError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_s2dt(path: &Path) -> Result<Tensor, S2dtError> {
    let bytes = fs::read(path).map_err(|source| S2dtError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Tensor::from_bytes(&bytes)
}

/// 8-bit binary PGM (P5) of a `[0, 1]` image; values are scaled by 255,
/// rounded and clamped.
pub fn pgm_bytes(rows: usize, cols: usize, data: &[f32]) -> Vec<u8> {
    assert_eq!(rows * cols, data.len(), "image shape mismatch");
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(
        data.iter()
            .map(|&v| (f64::from(v) * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn write_pgm(path: &Path, rows: usize, cols: usize, data: &[f32]) -> Result<(), S2dtError> {
    fs::write(path, pgm_bytes(rows, cols, data)).map_err(|source| S2dtError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_exact() {
        let t = Tensor::new(vec![2, 3], vec![0.0, 1.0, 2.0, 3.0, 4.0, -1.5]).unwrap();
        let b = t.to_bytes();
        assert_eq!(&b[..7], b"S2DT\x01\x01\x02");
        assert_eq!(&b[7..15], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(b.len(), 15 + 24);
        assert_eq!(&b[35..39], &(-1.5f32).to_le_bytes());
    }

    #[test]
    fn truncation_names_offset() {
        let t = Tensor::new(vec![4], vec![1.0; 4]).unwrap();
        let b = t.to_bytes();
        let err = Tensor::from_bytes(&b[..b.len() - 3]).unwrap_err();
        match err {
            S2dtError::Truncated { offset, needed, what } => {
                assert_eq!(offset, b.len() - 3);
                assert_eq!(needed, 3);
                assert_eq!(what, "payload");
            }
            other => panic!("{other:?}"),
        }
        assert!(err_string(&b[..5]).contains("offset 5"));
    }

    fn err_string(b: &[u8]) -> String {
        Tensor::from_bytes(b).unwrap_err().to_string()
    }

    #[test]
    fn rejects_foreign_headers() {
        assert!(matches!(Tensor::from_bytes(b"NOPE\x01\x01\x00"), Err(S2dtError::BadMagic(_))));
        assert!(matches!(
            Tensor::from_bytes(b"S2DT\x02\x01\x00"),
            Err(S2dtError::UnsupportedVersion(2))
        ));
        assert!(matches!(
            Tensor::from_bytes(b"S2DT\x01\x02\x00"),
            Err(S2dtError::UnsupportedDtype(2))
        ));
        let mut b = Tensor::new(vec![1], vec![0.0]).unwrap().to_bytes();
        b.push(0);
        assert!(matches!(Tensor::from_bytes(&b), Err(S2dtError::TrailingBytes(1))));
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn pgm_scaling() {
        let b = pgm_bytes(1, 3, &[0.0, 0.5, 1.0]);
        assert_eq!(&b[..11], b"P5\n3 1\n255\n");
        assert_eq!(&b[11..], &[0, 128, 255]);
    }

    proptest! {
        #[test]
        fn bytes_round_trip(dims in proptest::collection::vec(1usize..5, 0..4), seed in any::<u32>()) {
            let n: usize = dims.iter().product();
            let data: Vec<f32> = (0..n).map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32) & 0x7f7f_ffff)).collect();
            let t = Tensor::new(dims, data).unwrap();
            let back = Tensor::from_bytes(&t.to_bytes()).unwrap();
            prop_assert_eq!(back.dims, t.dims);
            prop_assert!(back.data.iter().zip(&t.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
