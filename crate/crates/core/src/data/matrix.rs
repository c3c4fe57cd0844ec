//! Flat matrix files ("imvcdc-mat-v1").
//!
//! ```text
//! tag      8 bytes  b"IMVCMAT1"
//! rows     u64 LE
//! cols     u64 LE
//! values   rows·cols × f64 LE, row-major
//! ```

use crate::error::{Error, Result};
use crate::nn::Tensor;
use std::path::Path;

pub const MATRIX_TAG: &[u8; 8] = b"IMVCMAT1";
const HEADER: usize = 24;

pub fn matrix_to_bytes(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * t.len());
    out.extend_from_slice(MATRIX_TAG);
    out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
    for x in t.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn matrix_from_bytes(bytes: &[u8], origin: &Path) -> Result<Tensor> {
    if bytes.len() < HEADER || &bytes[..8] != MATRIX_TAG {
        return Err(Error::format(origin, "missing imvcdc-mat-v1 header"));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::format(origin, format!("{rows}x{cols} overflows")))?;
    let payload = &bytes[HEADER..];
    if payload.len() != expected {
        return Err(Error::format(
            origin,
            format!(
                "header says {rows}x{cols} ({expected} bytes), payload has {}",
                payload.len()
            ),
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Tensor::new(vec![rows, cols], data)
}

pub fn is_matrix_file(bytes: &[u8]) -> bool {
    bytes.len() >= 8 && &bytes[..8] == MATRIX_TAG
}

pub fn save_matrix(path: &Path, t: &Tensor) -> Result<()> {
    std::fs::write(path, matrix_to_bytes(t)).map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    matrix_from_bytes(&bytes, path)
}
