//! Binary index file.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "IBVXIDX\0"
//! version      u32
//! dim          u32
//! count        u64
//! flags        u32      bit 0: vectors normalized at build
//! embedder_id  u32 length + UTF-8 bytes
//! ids          count × (u32 length + UTF-8 bytes)
//! vectors      count × dim × f64
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::VectorIndex;
use crate::{Error, Result, Scalar};

pub const INDEX_MAGIC: &[u8; 8] = b"IBVXIDX\0";
pub const INDEX_VERSION: u32 = 1;

const FLAG_NORMALIZED: u32 = 1;

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl<T: Scalar> VectorIndex<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.data.len() * 8);
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u64).to_le_bytes());
        let flags = if self.normalized { FLAG_NORMALIZED } else { 0 };
        out.extend_from_slice(&flags.to_le_bytes());
        put_str(&mut out, &self.embedder_id);
        for id in &self.ids {
            put_str(&mut out, id);
        }
        for x in &self.data {
            out.extend_from_slice(&x.as_f64().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes };
        let magic = r.take(8)?;
        if magic != INDEX_MAGIC {
            return Err(Error::IndexFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(Error::IndexFormat(format!("unsupported version {version}")));
        }
        let dim = r.u32()? as usize;
        let count = usize::try_from(r.u64()?)
            .map_err(|_| Error::IndexFormat("count overflows".into()))?;
        let flags = r.u32()?;
        if dim == 0 {
            return Err(Error::IndexFormat("zero dimension".into()));
        }
        let embedder_id = r.string()?;
        let mut ids = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            ids.push(r.string()?);
        }
        let n = count
            .checked_mul(dim)
            .ok_or_else(|| Error::IndexFormat("size overflows".into()))?;
        if r.buf.len() != n * 8 {
            return Err(Error::IndexFormat(format!(
                "expected {} vector bytes, found {}",
                n * 8,
                r.buf.len()
            )));
        }
        let mut data = Vec::with_capacity(n);
        for chunk in r.buf.chunks_exact(8) {
            let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            if !v.is_finite() {
                return Err(Error::IndexFormat("non-finite component".into()));
            }
            data.push(T::from_f64_lossy(v));
        }
        let mut seen = std::collections::HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::IndexFormat(format!("duplicate chunk id `{dup}`")));
        }
        Ok(Self::from_raw(
            embedder_id,
            dim,
            ids,
            data,
            flags & FLAG_NORMALIZED != 0,
        ))
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::IndexFormat("truncated file".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::IndexFormat("string is not UTF-8".into()))
    }
}

pub fn write_index<T: Scalar>(index: &VectorIndex<T>, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&index.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_index<T: Scalar>(path: &Path) -> Result<VectorIndex<T>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    VectorIndex::from_bytes(&bytes)
}

/// One line per entry: chunk id, L2 norm, and the first eight components.
pub fn dump<T: Scalar>(index: &VectorIndex<T>, out: &mut dyn io::Write) -> io::Result<()> {
    writeln!(
        out,
        "# embedder={} dim={} count={} normalized={}",
        index.embedder_id(),
        index.dim(),
        index.len(),
        index.is_normalized()
    )?;
    for (id, v) in index.iter() {
        let norm = crate::scalar::dot_f64(v, v).sqrt();
        let mut line = format!("{id}\t{norm:.6}\t");
        for (i, x) in v.iter().take(8).enumerate() {
            if i > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{:.6}", x.as_f64());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::Embedding;

    fn sample() -> VectorIndex<f64> {
        VectorIndex::from_entries(
            "emb",
            3,
            vec![
                ("a".into(), Embedding::new(vec![1.0, 2.0, 3.0]).unwrap()),
                ("b".into(), Embedding::new(vec![-0.5, 0.0, 0.25]).unwrap()),
            ],
            true,
        )
        .unwrap()
    }

    #[test]
    fn roundtrip() {
        let idx = sample();
        let bytes = idx.to_bytes();
        assert_eq!(&bytes[..8], INDEX_MAGIC);
        assert_eq!(VectorIndex::<f64>::from_bytes(&bytes).unwrap(), idx);
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 1);
        let tail = &bytes[bytes.len() - 8..];
        assert_eq!(f64::from_le_bytes(tail.try_into().unwrap()), 0.25);
    }

    #[test]
    fn truncated_and_corrupt() {
        let bytes = sample().to_bytes();
        assert!(VectorIndex::<f64>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(VectorIndex::<f64>::from_bytes(&bad).is_err());
        let mut v2 = bytes;
        v2[8] = 2;
        assert!(VectorIndex::<f64>::from_bytes(&v2).is_err());
    }

    #[test]
    fn dump_lines() {
        let mut out = Vec::new();
        dump(&sample(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("a\t3.741657\t1.000000 2.000000 3.000000"));
    }
}
