//! Little-endian tensor container.
//!
//! Layout: magic `PLT1`, `u32` version, then entries until end of file, each
//! `u16` name length, UTF-8 name, `u8` rank, `rank x u32` dims and an `f32`
//! payload of `prod(dims)` values.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PLT1";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl TensorEntry {
    pub fn new(name: impl Into<String>, dims: &[usize], data: Vec<f32>) -> Self {
        let dims: Vec<u32> = dims.iter().map(|&d| d as u32).collect();
        debug_assert_eq!(dims.iter().map(|&d| d as usize).product::<usize>(), data.len());
        Self {
            name: name.into(),
            dims,
            data,
        }
    }

    pub fn from_f64(name: impl Into<String>, dims: &[usize], data: &[f64]) -> Self {
        Self::new(name, dims, data.iter().map(|&v| v as f32).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn dims_usize(&self) -> Vec<usize> {
        self.dims.iter().map(|&d| d as usize).collect()
    }
}

pub fn encode(entries: &[TensorEntry]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for e in entries {
        let name = e.name.as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(e.dims.len() as u8);
        for d in &e.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &e.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::TruncatedTensor {
                path: self.path.to_path_buf(),
                detail: format!(
                    "needed {n} bytes for {what} at offset {}, only {} remain",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Vec<TensorEntry>> {
    let mut cur = Cursor { bytes, pos: 0, path };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            detail: "bad magic, expected PLT1".into(),
        });
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: VERSION,
        });
    }
    let mut entries = Vec::new();
    while cur.pos < bytes.len() {
        let name_len = u16::from_le_bytes(cur.take(2, "name length")?.try_into().unwrap());
        let name = std::str::from_utf8(cur.take(name_len as usize, "name")?)
            .map_err(|_| Error::Malformed {
                path: path.to_path_buf(),
                detail: "tensor name is not UTF-8".into(),
            })?
            .to_string();
        let rank = cur.take(1, "rank")?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32("dims")?);
        }
        let count: usize = dims.iter().map(|&d| d as usize).product();
        let raw = cur.take(count * 4, &format!("payload of '{name}'"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        entries.push(TensorEntry { name, dims, data });
    }
    Ok(entries)
}

pub fn write(path: &Path, entries: &[TensorEntry]) -> Result<()> {
    std::fs::write(path, encode(entries))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Vec<TensorEntry>> {
    let bytes = std::fs::read(path)?;
    decode(&bytes, path)
}

pub(crate) fn find<'a>(entries: &'a [TensorEntry], name: &str) -> Option<&'a TensorEntry> {
    entries.iter().find(|e| e.name == name)
}
