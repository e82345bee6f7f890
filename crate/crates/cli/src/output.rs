//! Result-file plumbing: the CSV report format, JSON documents, and chain
//! dumps. All numeric formatting uses shortest-roundtrip notation with '.'
//! decimals, so a fixed (config, seed) pair reproduces files byte for byte;
//! the wall_time column and the timestamp JSON field are the only values
//! that vary between runs, each isolated in its own field.

use crate::Failure;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const CSV_HEADER: &str = "quantity,value,stderr,N,M,seed,wall_time";

/// One report row. `stderr = None` marks a deterministic (exact) quantity
/// and prints as the literal tag `exact`.
pub struct Row {
    pub quantity: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub wall_time: f64,
}

/// Shortest-roundtrip decimal for ordinary magnitudes, scientific notation
/// for extreme ones; both parse back to the identical f64.
fn fmt_num(v: f64) -> String {
    if v == 0.0 || (1e-4..1e6).contains(&v.abs()) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

impl Row {
    fn to_line(&self) -> String {
        let stderr = match self.stderr {
            Some(s) => fmt_num(s),
            None => "exact".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{:.3}",
            self.quantity,
            fmt_num(self.value),
            stderr,
            self.n,
            self.m,
            self.seed,
            self.wall_time
        )
    }
}

pub fn write_csv(dir: &Path, name: &str, rows: &[Row]) -> Result<PathBuf, Failure> {
    let mut doc = String::from(CSV_HEADER);
    doc.push('\n');
    for r in rows {
        doc.push_str(&r.to_line());
        doc.push('\n');
    }
    write_file(dir, name, doc.as_bytes())
}

pub fn write_json<T: serde::Serialize>(
    dir: &Path,
    name: &str,
    doc: &T,
) -> Result<PathBuf, Failure> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| Failure::resource(format!("cannot serialize {name}: {e}")))?;
    text.push('\n');
    write_file(dir, name, text.as_bytes())
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::resource(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, bytes)
        .map_err(|e| Failure::resource(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Binary chain dump: the 8-byte magic "SPHCHAIN", then little-endian f64
/// words — first the sample count and the dimension, then the samples
/// flattened row-major.
pub fn sphchain_bytes(samples: &[Vec<f64>], n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 16 + samples.len() * n * 8);
    out.extend_from_slice(b"SPHCHAIN");
    out.extend_from_slice(&(samples.len() as f64).to_le_bytes());
    out.extend_from_slice(&(n as f64).to_le_bytes());
    for s in samples {
        for &x in s {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn unix_timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
