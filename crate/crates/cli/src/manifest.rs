//! Run manifests: every command writes one next to its outputs, listing the
//! inputs' hashes and each artifact's content hash. Identical inputs must
//! reproduce identical artifact hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::errors::CliResult;

#[derive(Debug, Serialize)]
struct ArtifactEntry {
    path: String,
    hash: String,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    version: String,
    seed: u64,
    config_hashes: BTreeMap<String, String>,
    data_hashes: BTreeMap<String, String>,
    artifacts: Vec<ArtifactEntry>,
    wall_clock_seconds: f64,
}

pub struct ManifestBuilder {
    started: Instant,
    command: String,
    seed: u64,
    config_hashes: BTreeMap<String, String>,
    data_hashes: BTreeMap<String, String>,
    artifacts: Vec<PathBuf>,
}

fn hex(h: u64) -> String {
    format!("{h:016x}")
}

impl ManifestBuilder {
    pub fn new(seed: u64) -> Self {
        let command: Vec<String> = std::env::args().collect();
        ManifestBuilder {
            started: Instant::now(),
            command: command.join(" "),
            seed,
            config_hashes: BTreeMap::new(),
            data_hashes: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn config_hash(&mut self, name: &str, hash: u64) {
        self.config_hashes.insert(name.to_string(), hex(hash));
    }

    pub fn data_hash(&mut self, name: &str, hash: u64) {
        self.data_hashes.insert(name.to_string(), hex(hash));
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    /// Hash every artifact's bytes and write `manifest.json` in `out_dir`.
    pub fn write(self, out_dir: &Path) -> CliResult<()> {
        let path = out_dir.join("manifest.json");
        self.write_to(&path)
    }

    /// Write the manifest at an explicit path (for single-file outputs).
    pub fn write_to(self, path: &Path) -> CliResult<()> {
        let mut artifacts = Vec::with_capacity(self.artifacts.len());
        for p in &self.artifacts {
            let bytes = std::fs::read(p)?;
            artifacts.push(ArtifactEntry {
                path: p.display().to_string(),
                hash: hex(modprior::util::fnv1a(&bytes)),
            });
        }
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config_hashes: self.config_hashes,
            data_hashes: self.data_hashes,
            artifacts,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}
