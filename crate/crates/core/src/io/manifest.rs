use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::fsutil::{read_string, sha256_file, write_atomic};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProducedFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

/// Provenance record of one command run. The full config is embedded, so the manifest
/// alone suffices to re-run the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub command: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub base_seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<ProducedFile>,
    pub timings_s: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, config_hash: String, base_seed: u64) -> Self {
        Self {
            code_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash,
            config,
            base_seed,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timings_s: BTreeMap::new(),
        }
    }

    /// Records an input artifact by content hash.
    pub fn add_input(&mut self, label: &str, hash: String) {
        self.inputs.insert(label.into(), hash);
    }

    /// Hashes and records produced files under `dir`.
    pub fn add_outputs(&mut self, dir: &Path, files: &[PathBuf]) -> Result<()> {
        for f in files {
            let rel = f.strip_prefix(dir).unwrap_or(f).to_string_lossy().replace('\\', "/");
            self.outputs.push(ProducedFile {
                path: rel,
                sha256: sha256_file(f)?,
            });
        }
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        self.outputs.dedup_by(|a, b| a.path == b.path);
        Ok(())
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings_s.insert(stage.into(), start.elapsed().as_secs_f64());
        out
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn read(dir_or_file: &Path) -> Result<Self> {
        let path = if dir_or_file.is_dir() {
            dir_or_file.join(MANIFEST_FILE)
        } else {
            dir_or_file.to_path_buf()
        };
        if !path.exists() {
            return Err(Error::MissingArtifact(path));
        }
        serde_json::from_str(&read_string(&path)?).map_err(|e| Error::Format {
            file: path,
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Output hashes, ignoring timings, for comparing two runs.
    pub fn output_hashes(&self) -> Vec<(&str, &str)> {
        self.outputs
            .iter()
            .map(|o| (o.path.as_str(), o.sha256.as_str()))
            .collect()
    }
}
