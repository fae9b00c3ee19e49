//! Reproducibility manifests, emitted next to every output artifact.
//!
//! A manifest records the exact command line, the seeds in play, and digests
//! of every input file read during the run; re-running the recorded command
//! reproduces the primary artifact byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub version: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputDigest>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Tracks inputs and seeds across one command invocation.
pub struct Session {
    started: Instant,
    seeds: Vec<u64>,
    inputs: Vec<InputDigest>,
}

impl Session {
    pub fn new() -> Self {
        Session {
            started: Instant::now(),
            seeds: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn note_seed(&mut self, seed: u64) {
        self.seeds.push(seed);
    }

    /// Reads an input file and records its digest.
    pub fn read_file(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    /// Writes an artifact and its manifest.
    pub fn write_artifact(&self, path: &Path, contents: &str) -> Result<()> {
        fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        let manifest = RunManifest {
            command: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: self.seeds.clone(),
            inputs: self.inputs.clone(),
            wall_ms: self.started.elapsed().as_millis() as u64,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        let mpath = manifest_path(path);
        fs::write(&mpath, text).with_context(|| format!("cannot write {}", mpath.display()))?;
        Ok(())
    }
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let name = artifact
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    artifact.with_file_name(format!("{name}.manifest.json"))
}
