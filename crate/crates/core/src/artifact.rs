//! Artifact headers and line-delimited record IO.
//!
//! Every line-delimited file written by the harness may start with a single
//! header record `{"header": {...}}`; readers skip it transparently.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result, HARNESS_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub harness: String,
    pub seed: u64,
    pub manifest_hash: String,
}

impl ArtifactHeader {
    pub fn new(seed: u64, manifest_hash: impl Into<String>) -> Self {
        Self {
            harness: HARNESS_VERSION.to_string(),
            seed,
            manifest_hash: manifest_hash.into(),
        }
    }

    /// Header line for line-delimited record files.
    pub fn json_line(&self) -> String {
        #[derive(Serialize)]
        struct Wrapper<'a> {
            header: &'a ArtifactHeader,
        }
        serde_json::to_string(&Wrapper { header: self }).expect("header serializes")
    }

    /// One-line rendering for text formats, prefixed with `comment`.
    pub fn comment_line(&self, comment: &str) -> String {
        format!(
            "{comment} {} seed={} manifest={}",
            self.harness, self.seed, self.manifest_hash
        )
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn is_header_line(line: &str) -> bool {
    line.starts_with("{\"header\":")
}

/// Reads a line-delimited record file, skipping blank lines and the header.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || is_header_line(trimmed) {
            continue;
        }
        let record = serde_json::from_str(trimmed).map_err(|source| Error::Record {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Reads the header of a line-delimited file, if it has one.
pub fn read_header(path: &Path) -> Result<Option<ArtifactHeader>> {
    #[derive(Deserialize)]
    struct Wrapper {
        header: ArtifactHeader,
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    if !is_header_line(first.trim()) {
        return Ok(None);
    }
    let w: Wrapper = serde_json::from_str(first.trim()).map_err(|source| Error::Record {
        path: path.to_path_buf(),
        line: 1,
        source,
    })?;
    Ok(Some(w.header))
}

/// Writes records one per line, preceded by `header` when given.
pub fn write_jsonl<T: Serialize>(
    path: &Path,
    header: Option<&ArtifactHeader>,
    records: &[T],
) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    if let Some(h) = header {
        writeln!(w, "{}", h.json_line()).map_err(io)?;
    }
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::invalid(e.to_string()))?;
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_skipped_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let h = ArtifactHeader::new(7, "abc");
        write_jsonl(&path, Some(&h), &[1u32, 2, 3]).unwrap();
        let back: Vec<u32> = read_jsonl(&path).unwrap();
        assert_eq!(back, vec![1, 2, 3]);
        assert_eq!(read_header(&path).unwrap(), Some(h));
    }

    #[test]
    fn bad_record_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        fs::write(&path, "1\n\nnope\n").unwrap();
        let err = read_jsonl::<u32>(&path).unwrap_err();
        assert!(matches!(err, Error::Record { line: 3, .. }), "{err}");
    }
}
