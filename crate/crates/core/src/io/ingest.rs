//! Recorded-data ingestion.
//!
//! A recordings directory holds one CSV per stationary recording with header
//! `time,gx,gy,gz` (seconds, gyro rates) and a sidecar `labels.csv` with header
//! `file,heading_deg` and an optional third column `split` (`train`, `val`, `test`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{
    augment_by_heading_rotation, downsample, stratified_assignment, DatasetSplit, SourceTag, SplitName, SplitRatio,
    TimeSequence, CHANNELS,
};

pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GyroUnits {
    RadPerS,
    DegPerS,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub target_rate_hz: f64,
    /// Recordings are truncated to this length; shorter ones are rejected.
    pub duration_s: f64,
    /// Inferred from the timestamps when absent.
    pub source_rate_hz: Option<f64>,
    pub units: GyroUnits,
    pub latitude_deg: f64,
    /// Number of recordings per split in sidecar order; otherwise `split` ratios are
    /// applied by interleaving. A `split` column in the sidecar overrides both.
    pub split_counts: Option<[usize; 3]>,
    pub split: SplitRatio,
    /// Rotated copies generated per training recording (0 keeps the original only).
    pub augment_count: usize,
    pub augment_half_range_deg: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            target_rate_hz: 3.0,
            duration_s: 100.0,
            source_rate_hz: None,
            units: GyroUnits::RadPerS,
            latitude_deg: 0.0,
            split_counts: None,
            split: SplitRatio::default(),
            augment_count: 100,
            augment_half_range_deg: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub file: String,
    pub heading_deg: f64,
    pub split: Option<SplitName>,
}

fn format_error(file: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Format {
        file: file.to_path_buf(),
        line: line as usize,
        message: message.into(),
    }
}

fn csv_error(file: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    format_error(file, line, e.to_string())
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn check_header(rdr: &mut csv::Reader<std::fs::File>, path: &Path, want: &[&str], optional: usize) -> Result<usize> {
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let n = header.len();
    let ok = n >= want.len() - optional && n <= want.len() && header.iter().zip(want).all(|(a, b)| a == *b);
    if !ok {
        return Err(format_error(path, 1, format!("expected header `{}`", want.join(","))));
    }
    Ok(n)
}

pub fn read_labels(dir: &Path) -> Result<Vec<Recording>> {
    let path = dir.join(LABELS_FILE);
    let mut rdr = reader(&path)?;
    let columns = check_header(&mut rdr, &path, &["file", "heading_deg", "split"], 1)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != columns {
            return Err(format_error(
                &path,
                line,
                format!("expected {columns} fields, found {}", rec.len()),
            ));
        }
        let heading_deg: f64 = rec[1]
            .parse()
            .map_err(|_| format_error(&path, line, format!("bad heading `{}`", &rec[1])))?;
        let split = match rec.get(2) {
            None | Some("") => None,
            Some("train") => Some(SplitName::Train),
            Some("val") => Some(SplitName::Val),
            Some("test") => Some(SplitName::Test),
            Some(other) => return Err(format_error(&path, line, format!("unknown split `{other}`"))),
        };
        out.push(Recording {
            file: rec[0].to_string(),
            heading_deg,
            split,
        });
    }
    Ok(out)
}

/// Reads one recording CSV, checking that timestamps increase at a uniform rate.
/// Returns the samples (rad/s) and the sample rate.
pub fn read_recording(path: &Path, cfg: &IngestConfig) -> Result<(Vec<[f64; CHANNELS]>, f64)> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &["time", "gx", "gy", "gz"], 0)?;
    let scale = match cfg.units {
        GyroUnits::RadPerS => 1.0,
        GyroUnits::DegPerS => std::f64::consts::PI / 180.0,
    };
    let mut times = Vec::new();
    let mut lines = Vec::new();
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(format_error(
                path,
                line,
                format!("expected 4 fields, found {}", rec.len()),
            ));
        }
        let mut v = [0.0; 4];
        for (k, field) in rec.iter().enumerate() {
            v[k] = field.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                format_error(path, line, format!("field {} is not a finite number: `{field}`", k + 1))
            })?;
        }
        if let Some(&last) = times.last() {
            if v[0] <= last {
                return Err(format_error(
                    path,
                    line,
                    format!("timestamp {} does not increase (previous {last})", v[0]),
                ));
            }
        }
        times.push(v[0]);
        lines.push(line);
        samples.push([v[1] * scale, v[2] * scale, v[3] * scale]);
    }
    if samples.len() < 2 {
        return Err(format_error(path, 2, "a recording needs at least two samples"));
    }
    let rate = match cfg.source_rate_hz {
        Some(r) => r,
        None => (times.len() - 1) as f64 / (times[times.len() - 1] - times[0]),
    };
    let dt = 1.0 / rate;
    for k in 1..times.len() {
        if ((times[k] - times[k - 1]) - dt).abs() > 0.01 * dt {
            return Err(format_error(
                path,
                lines[k],
                format!("sample interval {} s deviates from 1/{rate} s", times[k] - times[k - 1]),
            ));
        }
    }
    Ok((samples, rate))
}

/// Snaps an inferred rate onto an integer multiple of the target rate when within
/// 0.1%, so timestamp rounding does not defeat down-sampling.
fn snap_rate(rate: f64, target: f64) -> f64 {
    let k = (rate / target).round();
    if k >= 1.0 && (rate - k * target).abs() <= 1e-3 * rate {
        k * target
    } else {
        rate
    }
}

/// Loads every recording named in the sidecar, truncates, down-samples, splits and
/// augments the training split.
pub fn ingest_recordings(dir: &Path, cfg: &IngestConfig) -> Result<DatasetSplit> {
    cfg.split.validate()?;
    let recordings = read_labels(dir)?;
    if recordings.is_empty() {
        return Err(format_error(&dir.join(LABELS_FILE), 2, "no recordings listed"));
    }
    let assignment: Vec<SplitName> = if recordings.iter().all(|r| r.split.is_some()) {
        recordings.iter().map(|r| r.split.expect("checked")).collect()
    } else if let Some(counts) = cfg.split_counts {
        if counts.iter().sum::<usize>() != recordings.len() {
            return Err(Error::config(
                "ingest.split_counts",
                format!(
                    "counts sum to {} but {} recordings are listed",
                    counts.iter().sum::<usize>(),
                    recordings.len()
                ),
            ));
        }
        SplitName::ALL
            .iter()
            .zip(counts)
            .flat_map(|(s, c)| std::iter::repeat_n(*s, c))
            .collect()
    } else {
        stratified_assignment(recordings.len(), &cfg.split)
    };
    let lat = cfg.latitude_deg.to_radians();
    let mut data = DatasetSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        ratio: cfg.split,
    };
    for (rec, split) in recordings.iter().zip(assignment) {
        let path: PathBuf = dir.join(&rec.file);
        let (samples, rate) = read_recording(&path, cfg)?;
        let rate = snap_rate(rate, cfg.target_rate_hz);
        let needed = (cfg.duration_s * rate).round() as usize;
        if samples.len() < needed {
            return Err(format_error(
                &path,
                samples.len() as u64 + 1,
                format!(
                    "recording has {} samples, {needed} required for {} s",
                    samples.len(),
                    cfg.duration_s
                ),
            ));
        }
        let raw = TimeSequence::new(
            samples[..needed].to_vec(),
            rate,
            Some(rec.heading_deg.to_radians()),
            lat,
            SourceTag::Recorded,
        );
        let seq = downsample(&raw, cfg.target_rate_hz)?;
        if split == SplitName::Train && cfg.augment_count > 0 {
            let copies = augment_by_heading_rotation(&seq, cfg.augment_count, cfg.augment_half_range_deg.to_radians())?;
            data.train.extend(copies);
        } else {
            data.get_mut(split).push(seq);
        }
    }
    Ok(data)
}
