//! IDX files (the MNIST container format).
//!
//! A big-endian magic `0x0000 TT RR` (type code `TT`, rank `RR`), `RR`
//! big-endian `u32` dimension sizes, then the payload. Only the unsigned
//! byte type (`0x08`) is supported.

use crate::error::{Error, Result};
use crate::nn::Tensor;
use std::path::Path;

const TYPE_U8: u8 = 0x08;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxArray {
    pub fn parse(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::format(origin, "file shorter than the IDX magic"));
        }
        let magic = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes"));
        let (ty, rank) = (bytes[2], bytes[3] as usize);
        if bytes[0] != 0 || bytes[1] != 0 || ty != TYPE_U8 || rank == 0 {
            return Err(Error::format(
                origin,
                format!("unsupported IDX magic 0x{magic:08X} (expected 0x000008RR with RR >= 1)"),
            ));
        }
        let header = 4 + 4 * rank;
        if bytes.len() < header {
            return Err(Error::format(origin, "truncated IDX header"));
        }
        let dims: Vec<usize> = (0..rank)
            .map(|r| u32::from_be_bytes(bytes[4 + 4 * r..8 + 4 * r].try_into().expect("4 bytes")) as usize)
            .collect();
        let numel = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| {
            Error::format(origin, format!("IDX dimensions {dims:?} overflow"))
        })?;
        let payload = &bytes[header..];
        if payload.len() < numel {
            return Err(Error::format(
                origin,
                format!(
                    "truncated IDX payload: header promises {numel} bytes ({dims:?}), found {}",
                    payload.len()
                ),
            ));
        }
        if payload.len() > numel {
            return Err(Error::format(
                origin,
                format!("{} trailing bytes after IDX payload", payload.len() - numel),
            ));
        }
        Ok(IdxArray {
            dims,
            data: payload.to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.dims.is_empty() || self.dims.len() > 255 {
            return Err(Error::invalid("IDX rank must be in 1..=255"));
        }
        if self.dims.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape("write_idx", format!("{:?} vs {} bytes", self.dims, self.data.len())));
        }
        let mut out = vec![0, 0, TYPE_U8, self.dims.len() as u8];
        for &d in &self.dims {
            let d = u32::try_from(d).map_err(|_| Error::invalid(format!("IDX dimension {d} too large")))?;
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        Ok(out)
    }
}

pub fn read_idx(path: &Path) -> Result<IdxArray> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    IdxArray::parse(&bytes, path)
}

pub fn write_idx(path: &Path, array: &IdxArray) -> Result<()> {
    std::fs::write(path, array.to_bytes()?).map_err(|e| Error::io(path, e))
}

/// Rank-1 files (labels) come back as raw values of shape `[n]`. Higher
/// ranks (images) are flattened to `n × prod(rest)` and min-max scaled to
/// `[0, 1]` over the whole file.
pub fn load_idx(path: &Path) -> Result<Tensor> {
    idx_to_tensor(read_idx(path)?)
}

pub(crate) fn idx_to_tensor(a: IdxArray) -> Result<Tensor> {
    if a.dims.len() == 1 {
        return Tensor::new(a.dims, a.data.iter().map(|&b| f64::from(b)).collect());
    }
    let n = a.dims[0];
    let cols: usize = a.dims[1..].iter().product();
    let (lo, hi) = a
        .data
        .iter()
        .fold((u8::MAX, u8::MIN), |(lo, hi), &b| (lo.min(b), hi.max(b)));
    let range = f64::from(hi.saturating_sub(lo));
    let data = a
        .data
        .iter()
        .map(|&b| if range > 0.0 { f64::from(b - lo) / range } else { 0.0 })
        .collect();
    Tensor::new(vec![n, cols], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_built_label_file() {
        let bytes = [0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 3, 7];
        let a = IdxArray::parse(&bytes, Path::new("labels")).unwrap();
        let t = idx_to_tensor(a).unwrap();
        assert_eq!(t.shape(), &[2]);
        assert_eq!(t.data(), &[3.0, 7.0]);
    }

    #[test]
    fn bad_magic_is_named() {
        let bytes = [0xDE, 0xAD, 0xBE, 0xEF, 0, 0, 0, 0];
        let err = IdxArray::parse(&bytes, Path::new("x")).unwrap_err().to_string();
        assert!(err.contains("0xDEADBEEF"), "{err}");
    }

    #[test]
    fn short_payload_is_truncation() {
        // 4 images of 2×2 promised, 3 delivered
        let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0, 2];
        bytes.extend(std::iter::repeat_n(1u8, 12));
        let err = IdxArray::parse(&bytes, Path::new("x")).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn overflowing_dims_are_rejected() {
        let mut bytes = vec![0, 0, 8, 3];
        for _ in 0..3 {
            bytes.extend_from_slice(&u32::MAX.to_be_bytes());
        }
        assert!(IdxArray::parse(&bytes, Path::new("x")).is_err());
    }

    #[test]
    fn images_are_flattened_and_scaled() {
        let a = IdxArray {
            dims: vec![2, 2, 2],
            data: vec![10, 20, 30, 40, 50, 60, 70, 110],
        };
        let t = idx_to_tensor(a).unwrap();
        assert_eq!(t.shape(), &[2, 4]);
        assert_eq!(t.get(0, 0), 0.0);
        assert_eq!(t.get(1, 3), 1.0);
        assert!((t.get(0, 1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.idx");
        let a = IdxArray {
            dims: vec![3, 1, 2],
            data: vec![0, 1, 2, 253, 254, 255],
        };
        write_idx(&p, &a).unwrap();
        assert_eq!(read_idx(&p).unwrap(), a);
    }

    proptest! {
        #[test]
        fn idx_round_trip(dims in proptest::collection::vec(0usize..5, 1..4), seed: u8) {
            let numel: usize = dims.iter().product();
            let data: Vec<u8> = (0..numel).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
            let a = IdxArray { dims, data };
            let back = IdxArray::parse(&a.to_bytes().unwrap(), Path::new("mem")).unwrap();
            prop_assert_eq!(back, a);
        }
    }
}
