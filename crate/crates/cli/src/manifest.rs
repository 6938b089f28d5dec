use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pansharp::simulate::SimulationSpec;
use pansharp::solver::SolveReport;

/// A file together with the SHA-256 of its contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileRecord { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }

    /// Errors if the file changed since it was recorded.
    pub fn verify(&self) -> Result<()> {
        let now = sha256_file(&self.path)?;
        if now != self.sha256 {
            bail!("{} changed since the manifest was written (sha256 {now}, expected {})", self.path.display(), self.sha256);
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReferenceSource {
    File(FileRecord),
    Procedural { width: usize, height: usize, bands: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationManifest {
    pub command: String,
    pub reference: ReferenceSource,
    pub spec: SimulationSpec,
    pub seed: u64,
    pub pan: FileRecord,
    pub lowres: FileRecord,
    pub truth: FileRecord,
}

/// Iteration summary of one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub band: usize,
    pub iterations: usize,
    pub final_relative_change: f64,
    pub converged: bool,
    pub tau: f64,
    pub final_energy: f64,
}

impl BandSummary {
    pub fn new(band: usize, report: &SolveReport) -> Self {
        BandSummary {
            band,
            iterations: report.iterations,
            final_relative_change: report.final_relative_change,
            converged: report.converged,
            tau: report.tau,
            final_energy: report.energy_trace.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_ms: f64,
    pub fuse_ms: f64,
    pub write_ms: f64,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
