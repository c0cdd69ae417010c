//! Checkpoint container:
//!
//! ```text
//! magic "GYRODIFF" | version u32 LE | header length u64 LE | header JSON
//! | parameter count u64 LE | parameters f64 LE | SHA-256 of all preceding bytes
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::fsutil::{read, write_atomic};
use crate::diffusion::{DenoiserArch, DenoiserNetwork, ScheduleParams};
use crate::error::{Error, Result};
use crate::heading::{HeadingArch, HeadingModel, HeadingNetwork, InputScaler, Variant};
use crate::training::TrainingCurve;

pub const MAGIC: &[u8; 8] = b"GYRODIFF";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Denoiser {
        arch: DenoiserArch,
    },
    Heading {
        arch: HeadingArch,
        variant: Variant,
        scaler: InputScaler,
        /// Whether inputs pass through the denoiser stage first.
        denoised: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: Architecture,
    pub schedule: Option<ScheduleParams>,
    pub base_seed: u64,
    pub best_epoch: usize,
    pub config: serde_json::Value,
    pub curve: TrainingCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(60 + header.len() + self.params.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    /// Any length, magic or digest inconsistency is reported as a checksum failure.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = || Error::Checksum(path.to_path_buf());
        if bytes.len() < 8 + 4 + 8 + 8 + 32 || &bytes[..8] != MAGIC {
            return Err(corrupt());
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt());
        }
        let version = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                file: path.to_path_buf(),
                line: 0,
                message: format!("unsupported checkpoint version {version}"),
            });
        }
        let header_len = u64::from_le_bytes(body[12..20].try_into().expect("8 bytes")) as usize;
        let header_end = 20usize
            .checked_add(header_len)
            .filter(|&e| e + 8 <= body.len())
            .ok_or_else(corrupt)?;
        let header: CheckpointHeader = serde_json::from_slice(&body[20..header_end]).map_err(|e| Error::Format {
            file: path.to_path_buf(),
            line: e.line(),
            message: format!("checkpoint header: {e}"),
        })?;
        let count = u64::from_le_bytes(body[header_end..header_end + 8].try_into().expect("8 bytes")) as usize;
        let data = &body[header_end + 8..];
        if count.checked_mul(8) != Some(data.len()) {
            return Err(corrupt());
        }
        let params = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self { header, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingCheckpoint(path.to_path_buf()));
        }
        Self::decode(&read(path)?, path)
    }

    pub fn denoiser(&self) -> Result<(DenoiserNetwork, ScheduleParams)> {
        match &self.header.architecture {
            Architecture::Denoiser { arch } => {
                let sched = self
                    .header
                    .schedule
                    .ok_or_else(|| Error::config("checkpoint.schedule", "denoiser checkpoint lacks a schedule"))?;
                Ok((DenoiserNetwork::from_params(*arch, self.params.clone())?, sched))
            }
            _ => Err(Error::config(
                "checkpoint.architecture",
                "expected a denoiser checkpoint",
            )),
        }
    }

    /// The heading model and whether it expects denoised inputs.
    pub fn heading(&self) -> Result<(HeadingModel, Variant, bool)> {
        match &self.header.architecture {
            Architecture::Heading {
                arch,
                variant,
                scaler,
                denoised,
            } => Ok((
                HeadingModel {
                    net: HeadingNetwork::from_params(*arch, self.params.clone())?,
                    scaler: *scaler,
                },
                *variant,
                *denoised,
            )),
            _ => Err(Error::config(
                "checkpoint.architecture",
                "expected a heading checkpoint",
            )),
        }
    }
}
