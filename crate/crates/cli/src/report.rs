//! Report document and file output.
//!
//! Reports carry the experiment verdicts, kind-specific metrics, the
//! verbatim config text, and the artifact version. Nothing
//! environment-dependent goes in: reruns of the same config and seed must
//! produce byte-identical bodies.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub details: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, details: String) -> Self {
        Verdict { name: name.to_string(), pass, details }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentReport {
    pub version: String,
    pub kind: String,
    pub seed: u64,
    /// Canonical (parsed) config.
    pub config: serde_json::Value,
    /// Verbatim config document as supplied.
    pub config_text: String,
    pub verdicts: Vec<Verdict>,
    pub metrics: serde_json::Value,
}

impl ExperimentReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// Writes bytes atomically: temp file in the target directory, then
/// rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "missing file name"))?;
    let tmp: PathBuf = dir.join(format!(".tmp.{}", file_name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes a CSV with a header row; every cell is rendered with Rust's
/// shortest round-trip float formatting, so output is deterministic.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Histogram of a standardized sample against the standard normal
/// density, as (bin center, empirical density, normal density) rows.
pub fn standardized_histogram_rows(sample: &[f64], bins: usize) -> Vec<Vec<String>> {
    let lo = -4.0;
    let hi = 4.0;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in sample {
        if x >= lo && x < hi {
            counts[((x - lo) / width) as usize] += 1;
        }
    }
    let n = sample.len() as f64;
    (0..bins)
        .map(|b| {
            let center = lo + (b as f64 + 0.5) * width;
            let density = counts[b] as f64 / (n * width);
            let normal = (-0.5 * center * center).exp() / (2.0 * std::f64::consts::PI).sqrt();
            vec![format!("{center}"), format!("{density}"), format!("{normal}")]
        })
        .collect()
}
