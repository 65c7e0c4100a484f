//! Binary parameter checkpoints.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic        8 bytes   "HLFSRCKP"
//! version      u32       FORMAT_VERSION
//! precision    u8        element width in bytes: 4 (f32) or 8 (f64)
//! meta_len     u32
//! meta         meta_len bytes of UTF-8 (TOML document, opaque to this module)
//! count        u32       number of parameters
//! count × {
//!     name_len u16
//!     name     name_len bytes of UTF-8
//!     frozen   u8        0 or 1
//!     ndim     u8        at most MAX_NDIM
//!     dims     ndim × u64
//!     data     product(dims) × precision bytes, row-major
//! }
//! ```
//!
//! Trailing bytes after the last parameter are rejected.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Element, ParamStore, Precision, Tensor};

pub const MAGIC: &[u8; 8] = b"HLFSRCKP";
pub const FORMAT_VERSION: u32 = 1;
pub const MAX_NDIM: usize = 8;

#[derive(Debug, Clone)]
pub struct Checkpoint<T: Element> {
    pub metadata: String,
    pub params: ParamStore<T>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn utf8(bytes: &[u8], what: &str) -> Result<String> {
    String::from_utf8(bytes.to_vec()).map_err(|_| Error::Checkpoint(format!("{what} is not valid UTF-8")))
}

impl<T: Element> Checkpoint<T> {
    pub fn new(metadata: impl Into<String>, params: ParamStore<T>) -> Self {
        Self {
            metadata: metadata.into(),
            params,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(T::PRECISION.width());
        let meta = self.metadata.as_bytes();
        let meta_len = u32::try_from(meta.len()).map_err(|_| Error::Checkpoint("metadata too large".into()))?;
        out.extend_from_slice(&meta_len.to_le_bytes());
        out.extend_from_slice(meta);
        let count = u32::try_from(self.params.len()).map_err(|_| Error::Checkpoint("too many parameters".into()))?;
        out.extend_from_slice(&count.to_le_bytes());
        for p in self.params.iter() {
            let name = p.name.as_bytes();
            let name_len =
                u16::try_from(name.len()).map_err(|_| Error::Checkpoint(format!("name too long: {}", p.name)))?;
            if p.value.ndim() > MAX_NDIM {
                return Err(Error::Checkpoint(format!("{} has too many axes", p.name)));
            }
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name);
            out.push(u8::from(p.frozen));
            out.push(p.value.ndim() as u8);
            for &d in p.value.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in p.value.data() {
                v.write_le(&mut out);
            }
        }
        Ok(out)
    }

    /// Decodes a checkpoint, converting elements to `T` when the stored
    /// precision differs.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8, "magic")? != MAGIC {
            return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let tag = r.u8("precision")?;
        let precision =
            Precision::from_width(tag).ok_or_else(|| Error::Checkpoint(format!("unknown precision tag {tag}")))?;
        let meta_len = r.u32("metadata length")? as usize;
        let metadata = utf8(r.take(meta_len, "metadata")?, "metadata")?;
        let count = r.u32("parameter count")?;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let name_len = r.u16("name length")? as usize;
            let name = utf8(r.take(name_len, "name")?, "parameter name")?;
            let frozen = match r.u8("frozen flag")? {
                0 => false,
                1 => true,
                f => return Err(Error::Checkpoint(format!("invalid frozen flag {f}"))),
            };
            let ndim = r.u8("ndim")? as usize;
            if ndim > MAX_NDIM {
                return Err(Error::Checkpoint(format!("{name}: {ndim} axes exceeds {MAX_NDIM}")));
            }
            let mut shape = Vec::with_capacity(ndim);
            let mut numel: usize = 1;
            for _ in 0..ndim {
                let d = usize::try_from(r.u64("dim")?).map_err(|_| Error::Checkpoint("dimension overflow".into()))?;
                numel = numel
                    .checked_mul(d)
                    .ok_or_else(|| Error::Checkpoint(format!("{name}: element count overflows")))?;
                shape.push(d);
            }
            let width = precision.width() as usize;
            let nbytes = numel
                .checked_mul(width)
                .filter(|&n| n <= r.remaining())
                .ok_or_else(|| Error::Checkpoint(format!("{name}: truncated element data")))?;
            let raw = r.take(nbytes, "elements")?;
            let data: Vec<T> = match precision {
                Precision::F32 => raw
                    .chunks_exact(4)
                    .map(|c| T::from_f64(f32::read_le(c) as f64))
                    .collect(),
                Precision::F64 => raw.chunks_exact(8).map(|c| T::from_f64(f64::read_le(c))).collect(),
            };
            let id = params
                .add(name, Tensor::new(shape, data)?)
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
            params.get_mut(id).frozen = frozen;
        }
        if r.remaining() != 0 {
            return Err(Error::Checkpoint(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self { metadata, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
