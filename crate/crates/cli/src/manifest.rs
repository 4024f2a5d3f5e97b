//! Run manifests: every command records its full configuration, seed,
//! library version, wall clock and output paths, so a run can be reproduced
//! from the manifest alone.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub potential_digest: String,
    pub config: serde_json::Value,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

pub struct ManifestBuilder {
    command: String,
    seed: Option<u64>,
    potential_digest: String,
    config: serde_json::Value,
    started: Instant,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command: &str, potential_text: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            seed: None,
            potential_digest: format!("fnv1a64:{:016x}", fnv1a64(potential_text.as_bytes())),
            config,
            started: Instant::now(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn digest(&self) -> String {
        self.potential_digest.clone()
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes `manifest.json` into `out_dir`.
    pub fn write(self, out_dir: &Path) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            potential_digest: self.potential_digest,
            config: self.config,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
        };
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}

/// FNV-1a 64-bit digest; stable across platforms and releases.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
