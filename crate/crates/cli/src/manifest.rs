//! Run manifest: resolved inputs, artifact hashes and timings.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl Artifact {
    pub fn hash(path: &Path) -> io::Result<Self> {
        let data = fs::read(path)?;
        Ok(Self { path: path.to_path_buf(), bytes: data.len() as u64, sha256: hex::encode(Sha256::digest(&data)) })
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub deterministic: bool,
    pub threads: usize,
    /// Resolved configuration with all defaults filled in.
    pub config: serde_json::Value,
    pub artifacts: Vec<Artifact>,
    pub wall_time_s: f64,
}

impl RunManifest {
    /// Writes `manifest.json` into `dir`; call after every other output exists.
    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        aniso_ac::fem::io::write_atomic(&path, &(text + "\n"))?;
        Ok(path)
    }
}
