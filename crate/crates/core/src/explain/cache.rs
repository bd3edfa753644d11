use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Explanation;
use crate::{Error, Result};

/// One line of an explanation cache.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    #[serde(flatten)]
    pub explanation: Explanation,
    pub seed: u64,
    pub params_hash: String,
}

/// Parse a JSON-lines cache. A missing file is an empty cache; an
/// unterminated final line (an interrupted write) is ignored.
pub fn read_cache(path: impl AsRef<Path>) -> Result<Vec<CacheRecord>> {
    let path = path.as_ref();
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let complete = complete_prefix(&bytes);
    let mut out = Vec::new();
    for (i, line) in BufReader::new(&bytes[..complete]).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CacheRecord = serde_json::from_str(&line).map_err(|e| Error::Load {
            path: path.display().to_string(),
            row: i + 1,
            column: String::new(),
            message: format!("bad cache line: {e}"),
        })?;
        out.push(rec);
    }
    if complete < bytes.len() {
        log::warn!("{}: ignoring unterminated trailing line", path.display());
    }
    Ok(out)
}

fn complete_prefix(bytes: &[u8]) -> usize {
    bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1)
}

/// Append-only cache writer; every record is flushed as a whole line.
pub struct CacheWriter {
    path: PathBuf,
    file: File,
}

impl CacheWriter {
    /// Open for appending, first dropping any unterminated trailing line.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let io = |e| Error::io(&path, e);
        if let Ok(bytes) = std::fs::read(&path) {
            let keep = complete_prefix(&bytes);
            if keep < bytes.len() {
                OpenOptions::new().write(true).open(&path).and_then(|f| f.set_len(keep as u64)).map_err(io)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        Ok(Self { path, file })
    }

    pub fn append(&mut self, rec: &CacheRecord) -> Result<()> {
        let mut line = serde_json::to_vec(rec)?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| Error::io(&self.path, e))?;
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{weighted_items, ExplainerKind, ExplanationFlag};

    fn record(id: &str) -> CacheRecord {
        CacheRecord {
            explanation: Explanation {
                approach: ExplainerKind::Shap,
                model_id: "abc".into(),
                sample_id: id.into(),
                predicted_label: 1,
                items: weighted_items(&[0.1, -0.30000000000000004, 1e-300]),
                elapsed_s: 0.25,
                flags: vec![ExplanationFlag::NonAnchored],
            },
            seed: u64::MAX,
            params_hash: "ff".into(),
        }
    }

    #[test]
    fn round_trip_is_exact_and_truncation_is_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        assert!(read_cache(&path).unwrap().is_empty());
        let mut w = CacheWriter::open(&path).unwrap();
        w.append(&record("a")).unwrap();
        w.append(&record("b")).unwrap();
        drop(w);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().contains("\"items\":[{\"feature\":1,\"constraint\":\"weighted\""));
        assert_eq!(read_cache(&path).unwrap(), vec![record("a"), record("b")]);

        // simulate a crash mid-line
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"sample_id\":\"c\",").unwrap();
        assert_eq!(read_cache(&path).unwrap().len(), 2);
        let mut w = CacheWriter::open(&path).unwrap();
        w.append(&record("c")).unwrap();
        assert_eq!(read_cache(&path).unwrap(), vec![record("a"), record("b"), record("c")]);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(read_cache(&path), Err(Error::Load { row: 1, .. })));
    }
}
