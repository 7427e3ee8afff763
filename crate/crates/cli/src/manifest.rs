//! Run manifests, grid fingerprints and atomic file output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use degenspec::{MomentumGrid, SurfaceQuadrature};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Resolved;
use crate::CliError;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 over every ring's radius, angles, weight, `|∇P|` and `T`.
pub fn grid_fingerprint(grid: &MomentumGrid) -> String {
    let mut h = Sha256::new();
    h.update((grid.layout.dim as u64).to_le_bytes());
    h.update((grid.layout.azimuths as u64).to_le_bytes());
    for (r, t) in grid.layout.rings.iter().zip(&grid.excess) {
        for x in [r.radius, r.cos_polar, r.sin_polar, r.weight, r.gradnorm, *t] {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    hex(&h.finalize())
}

pub fn surface_fingerprint(quad: &SurfaceQuadrature) -> String {
    let mut h = Sha256::new();
    h.update((quad.dim as u64).to_le_bytes());
    h.update(quad.level.to_bits().to_le_bytes());
    for k in 0..quad.len() {
        for x in quad.nodes[k].iter().chain([&quad.weights[k], &quad.gradnorms[k]]) {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    hex(&h.finalize())
}

/// Short form used in CSV `grid_id` columns.
pub fn short_id(fingerprint: &str) -> &str {
    &fingerprint[..16]
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a crate::config::RunConfig,
    /// The configuration with all defaults filled in.
    pub resolved: &'a Resolved,
    pub fingerprints: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
    pub tolerances: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
    pub passed: bool,
}

/// Collects output files in memory and writes them only when the run has
/// produced all of them.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn commit(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir)?;
        self.files.iter().map(|(name, bytes)| write_atomic(&dir.join(name), bytes)).collect()
    }
}

/// Writes to a temporary sibling, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(path.to_path_buf())
}

/// Refuses a non-empty output directory unless `force` is set.
pub fn prepare_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        let occupied = std::fs::read_dir(dir)?.next().is_some();
        if occupied && !force {
            return Err(CliError::Usage(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    Ok(())
}
