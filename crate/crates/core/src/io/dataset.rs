//! On-disk dataset layout:
//!
//! ```text
//! <dir>/metadata.json         format, rates, counts, content hash, generator echo
//! <dir>/<split>.f64           "f64le <n> <time> 3\n" then n*time*3 little-endian f64
//! <dir>/<split>.labels.csv    "heading_rad,latitude_rad" then one row per sequence
//! ```
//!
//! Numbers in text files use the shortest representation that parses back to the same
//! bits, so a save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fsutil::{read, read_string, write_atomic};
use crate::error::{Error, Result};
use crate::pipeline::dataset_hash;
use crate::synth::{DatasetSplit, SourceTag, SplitName, SplitRatio, TimeSequence, CHANNELS};

pub const DATASET_FORMAT: &str = "gyrodiff-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub count: usize,
    pub n_time: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub format: String,
    pub version: u32,
    pub sample_rate_hz: f64,
    pub source: SourceTag,
    pub split_ratio: SplitRatio,
    pub train: SplitInfo,
    pub val: SplitInfo,
    pub test: SplitInfo,
    pub content_hash: String,
    /// Settings of the command that produced the dataset.
    pub generator: serde_json::Value,
}

fn array_path(dir: &Path, split: SplitName) -> PathBuf {
    dir.join(format!("{}.f64", split.as_str()))
}

fn labels_path(dir: &Path, split: SplitName) -> PathBuf {
    dir.join(format!("{}.labels.csv", split.as_str()))
}

pub fn metadata_path(dir: &Path) -> PathBuf {
    dir.join("metadata.json")
}

/// Shared length of the sequences in a split (0 for an empty split).
fn split_time(seqs: &[TimeSequence], split: SplitName) -> Result<usize> {
    let n_time = seqs.first().map_or(0, |s| s.len());
    if seqs.iter().any(|s| s.len() != n_time) {
        return Err(Error::shape(format!("{} sequences differ in length", split.as_str())));
    }
    Ok(n_time)
}

pub fn encode_array(seqs: &[TimeSequence], n_time: usize) -> Vec<u8> {
    let header = format!("f64le {} {} {}\n", seqs.len(), n_time, CHANNELS);
    let mut out = Vec::with_capacity(header.len() + seqs.len() * n_time * CHANNELS * 8);
    out.extend_from_slice(header.as_bytes());
    for row in seqs.iter().flat_map(|s| s.rows()) {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parses an array file into `(n, time, values)`.
pub fn decode_array(bytes: &[u8], file: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let fmt_err = |message: String| Error::Format {
        file: file.to_path_buf(),
        line: 1,
        message,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| fmt_err("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| fmt_err("header is not text".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "f64le" {
        return Err(fmt_err(format!("expected `f64le <n> <time> 3`, found `{header}`")));
    }
    let dims: Vec<usize> = parts[1..]
        .iter()
        .map(|p| p.parse().map_err(|_| fmt_err(format!("bad dimension `{p}`"))))
        .collect::<Result<_>>()?;
    if dims[2] != CHANNELS {
        return Err(fmt_err(format!("expected {CHANNELS} channels, found {}", dims[2])));
    }
    let body = &bytes[nl + 1..];
    let want = dims[0] * dims[1] * CHANNELS;
    if body.len() != want * 8 {
        return Err(fmt_err(format!(
            "expected {} data bytes, found {}",
            want * 8,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((dims[0], dims[1], values))
}

fn encode_labels(seqs: &[TimeSequence]) -> String {
    let mut out = String::from("heading_rad,latitude_rad\n");
    for s in seqs {
        let label = s.heading_label.map(|l| format!("{l:?}")).unwrap_or_default();
        let _ = writeln!(out, "{label},{:?}", s.latitude);
    }
    out
}

fn decode_labels(text: &str, file: &Path) -> Result<Vec<(Option<f64>, f64)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "heading_rad,latitude_rad")) => {}
        _ => {
            return Err(Error::Format {
                file: file.to_path_buf(),
                line: 1,
                message: "expected header `heading_rad,latitude_rad`".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let bad = |message: String| Error::Format {
                file: file.to_path_buf(),
                line: i + 1,
                message,
            };
            let (h, lat) = l
                .split_once(',')
                .ok_or_else(|| bad(format!("expected two columns in `{l}`")))?;
            let heading = if h.is_empty() {
                None
            } else {
                Some(h.parse::<f64>().map_err(|_| bad(format!("bad heading `{h}`")))?)
            };
            let lat = lat.parse::<f64>().map_err(|_| bad(format!("bad latitude `{lat}`")))?;
            Ok((heading, lat))
        })
        .collect()
}

fn common_rate(data: &DatasetSplit) -> Result<(f64, SourceTag)> {
    let mut all = SplitName::ALL.iter().flat_map(|s| data.get(*s));
    let first = all.next().ok_or(Error::EmptyBatch)?;
    let (rate, source) = (first.sample_rate, first.source);
    if all.any(|s| s.sample_rate != rate || s.source != source) {
        return Err(Error::shape("all sequences of a dataset must share rate and source"));
    }
    Ok((rate, source))
}

/// Writes the dataset; every file is replaced atomically.
pub fn save_dataset(dir: &Path, data: &DatasetSplit, generator: serde_json::Value) -> Result<DatasetMetadata> {
    let (rate, source) = common_rate(data)?;
    let mut info = Vec::new();
    for split in SplitName::ALL {
        let seqs = data.get(split);
        let n_time = split_time(seqs, split)?;
        write_atomic(&array_path(dir, split), &encode_array(seqs, n_time))?;
        write_atomic(&labels_path(dir, split), encode_labels(seqs).as_bytes())?;
        info.push(SplitInfo {
            count: seqs.len(),
            n_time,
        });
    }
    let mut info = info.into_iter();
    let meta = DatasetMetadata {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        sample_rate_hz: rate,
        source,
        split_ratio: data.ratio,
        train: info.next().expect("three splits"),
        val: info.next().expect("three splits"),
        test: info.next().expect("three splits"),
        content_hash: dataset_hash(data),
        generator,
    };
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    write_atomic(&metadata_path(dir), text.as_bytes())?;
    Ok(meta)
}

pub fn load_metadata(dir: &Path) -> Result<DatasetMetadata> {
    let path = metadata_path(dir);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    let meta: DatasetMetadata = serde_json::from_str(&read_string(&path)?).map_err(|e| Error::Format {
        file: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if meta.format != DATASET_FORMAT || meta.version != DATASET_VERSION {
        return Err(Error::Format {
            file: path,
            line: 1,
            message: format!("unsupported dataset format {} v{}", meta.format, meta.version),
        });
    }
    Ok(meta)
}

/// Reads a dataset written by [`save_dataset`] and checks it against the stored hash.
pub fn load_dataset(dir: &Path) -> Result<(DatasetSplit, DatasetMetadata)> {
    let meta = load_metadata(dir)?;
    let mut data = DatasetSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        ratio: meta.split_ratio,
    };
    for split in SplitName::ALL {
        let apath = array_path(dir, split);
        let (n, n_time, values) = decode_array(&read(&apath)?, &apath)?;
        let lpath = labels_path(dir, split);
        let labels = decode_labels(&read_string(&lpath)?, &lpath)?;
        if labels.len() != n {
            return Err(Error::Format {
                file: lpath,
                line: labels.len() + 1,
                message: format!("{} label rows for {n} sequences", labels.len()),
            });
        }
        let per = n_time * CHANNELS;
        let seqs = data.get_mut(split);
        for (k, (heading, latitude)) in labels.into_iter().enumerate() {
            let rows = crate::synth::unflatten_rows(&values[k * per..(k + 1) * per], n_time)?;
            seqs.push(TimeSequence::new(
                rows,
                meta.sample_rate_hz,
                heading,
                latitude,
                meta.source,
            ));
        }
    }
    if dataset_hash(&data) != meta.content_hash {
        return Err(Error::Checksum(metadata_path(dir)));
    }
    Ok((data, meta))
}
