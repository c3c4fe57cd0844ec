//! Flat parameter archives.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "imvcdc-ckpt-v1"            14 bytes
//! step                        u64
//! entry count                 u64
//! per entry:
//!   name length               u32
//!   name                      UTF-8
//!   rank                      u32
//!   dims                      rank × u64
//!   values                    prod(dims) × f64
//! ```

use super::param::ParamStore;
use super::tensor::checked_numel;
use super::Tensor;
use crate::error::{Error, Result};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 14] = b"imvcdc-ckpt-v1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub step: u64,
    pub entries: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore) -> Self {
        Checkpoint {
            step: store.step(),
            entries: store
                .named_values()
                .map(|(n, t)| (n.to_string(), t.clone()))
                .collect(),
        }
    }

    /// Adds a non-parameter entry (schedules, scaler statistics, ...).
    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.entries.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::invalid(format!("checkpoint has no entry {name:?}")))
    }

    /// Copies every parameter of `store` from this archive. Entries that
    /// are not parameters of `store` are ignored.
    pub fn restore_into(&self, store: &mut ParamStore) -> Result<()> {
        store.load_values(
            self.entries
                .iter()
                .filter(|(n, _)| store.id(n).is_some())
                .map(|(n, t)| (n.as_str(), t))
                .collect::<Vec<_>>(),
        )?;
        store.set_step(self.step);
        Ok(())
    }

    /// SHA-256 of the serialized archive, hex encoded.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        Sha256::digest(self.to_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for d in t.shape() {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, origin };
        let magic = r.take(CHECKPOINT_MAGIC.len())?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::format(origin, "not an imvcdc-ckpt-v1 archive"));
        }
        let step = r.u64()?;
        let count = r.u64()?;
        let mut entries = Vec::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::format(origin, "entry name is not UTF-8"))?
                .to_string();
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let numel = checked_numel(&shape)?;
            let raw = r.take(numel.checked_mul(8).ok_or_else(|| {
                Error::format(origin, format!("entry {name} is too large"))
            })?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            entries.push((name, Tensor::new(shape, data)?));
        }
        if r.pos != bytes.len() {
            return Err(Error::format(origin, "trailing bytes after last entry"));
        }
        Ok(Checkpoint { step, entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.origin, "truncated checkpoint"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
