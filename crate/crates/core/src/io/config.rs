use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fsutil::{read_string, sha256_hex};
use super::ingest::IngestConfig;
use super::manifest::RunManifest;
use crate::diffusion::{DiffusionTrainConfig, ScheduleParams};
use crate::error::{Error, Result};
use crate::heading::HeadingTrainConfig;
use crate::pipeline::PipelineConfig;
use crate::synth::{NoiseModel, SyntheticConfig};

/// Everything a command needs. Absent sections and keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// Seeds for multi-seed evaluation; empty means `[base_seed]`.
    pub eval_seeds: Vec<u64>,
    pub dataset: SyntheticConfig,
    pub schedule: ScheduleParams,
    pub denoiser: DiffusionTrainConfig,
    pub baseline: HeadingTrainConfig,
    pub enhanced: HeadingTrainConfig,
    pub pipeline: PipelineConfig,
    pub ingest: IngestConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            base_seed: 1,
            output_dir: PathBuf::from("runs"),
            eval_seeds: Vec::new(),
            dataset: SyntheticConfig {
                noise: Some(NoiseModel::default()),
                ..SyntheticConfig::default()
            },
            schedule: ScheduleParams::default(),
            denoiser: DiffusionTrainConfig::default(),
            baseline: HeadingTrainConfig::baseline(),
            enhanced: HeadingTrainConfig::enhanced(),
            pipeline: PipelineConfig::default(),
            ingest: IngestConfig::default(),
        }
    }
}

/// Line of `field` (dotted path) in a TOML document, if it is spelled out there.
pub fn locate_field(text: &str, field: &str) -> Option<usize> {
    let mut table = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            table = h.trim_matches(|c| c == '[' || c == ' ').to_string();
            if table == field {
                return Some(i + 1);
            }
            continue;
        }
        if let Some((key, _)) = line.split_once('=') {
            let key = key.trim().trim_matches('"');
            let full = if table.is_empty() {
                key.to_string()
            } else {
                format!("{table}.{key}")
            };
            if full == field {
                return Some(i + 1);
            }
        }
    }
    None
}

/// Dotted key path at `line` (1-based): the enclosing table plus the key on that line.
fn field_at_line(text: &str, line: usize) -> String {
    let mut table = String::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if let Some(h) = l.strip_prefix('[').and_then(|l| l.split(']').next()) {
            table = h.trim_matches(|c| c == '[' || c == ' ').to_string();
        }
        if i + 1 == line {
            if let Some((key, _)) = l.split_once('=') {
                let key = key.trim().trim_matches('"');
                return if table.is_empty() {
                    key.to_string()
                } else {
                    format!("{table}.{key}")
                };
            }
            return table;
        }
    }
    table
}

fn from_toml_error(e: toml::de::Error, text: &str) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    let field = line.map(|l| field_at_line(text, l)).filter(|f| !f.is_empty());
    Error::Config {
        field: field.unwrap_or_else(|| "config".into()),
        line,
        message: e.message().trim().to_string(),
    }
}

fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML document. Keys missing from a section fall back to that section's
    /// own defaults (so `[baseline]` keeps the baseline settings it does not mention).
    pub fn from_toml(text: &str) -> Result<Self> {
        // First pass only for diagnostics: errors carry spans into `text`.
        toml::from_str::<ExperimentConfig>(text).map_err(|e| from_toml_error(e, text))?;
        let user: toml::Table = text.parse().map_err(|e| from_toml_error(e, text))?;
        let mut table = toml::Table::try_from(ExperimentConfig::default()).expect("defaults serialize");
        merge(&mut table, user);
        let cfg: ExperimentConfig = table.try_into().map_err(|e| from_toml_error(e, text))?;
        cfg.validate().map_err(|e| match e {
            Error::Config { field, message, .. } => Error::Config {
                line: locate_field(text, &field),
                field,
                message,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Loads a TOML config, or the config embedded in a run manifest (`.json`).
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        if path.extension().is_some_and(|e| e == "json") || path.is_dir() {
            let manifest = RunManifest::read(path)?;
            let cfg: ExperimentConfig = serde_json::from_value(manifest.config).map_err(|e| Error::Format {
                file: path.to_path_buf(),
                line: 0,
                message: format!("embedded config: {e}"),
            })?;
            cfg.validate()?;
            return Ok(cfg);
        }
        Self::from_toml(&read_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        let sched = self.schedule.build()?;
        self.denoiser.validate()?;
        self.baseline.validate()?;
        self.enhanced.validate()?;
        self.pipeline.validate(&sched)?;
        self.ingest.split.validate()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// JSON form without the output location, for embedding in artifacts whose content
    /// must not depend on where they are written.
    pub fn artifact_json(&self) -> serde_json::Value {
        let mut v = self.to_json();
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
        }
        v
    }

    /// Hash of the canonical JSON form, output location excluded.
    pub fn hash(&self) -> String {
        sha256_hex(self.artifact_json().to_string().as_bytes())
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.eval_seeds.is_empty() {
            vec![self.base_seed]
        } else {
            self.eval_seeds.clone()
        }
    }
}
