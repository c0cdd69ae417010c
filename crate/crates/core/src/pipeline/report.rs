use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::norm::NormScope;
use crate::error::{Error, Result};
use crate::synth::{DatasetSplit, SplitName};
use crate::training::TrainingCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    MethodComparison,
    TbackSweep,
    NormalizationAblation,
}

/// One CRMSE measurement of one method on one split for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub duration_s: f64,
    pub t_back: Option<usize>,
    pub scope: Option<NormScope>,
    pub crmse_deg: f64,
    pub seed: u64,
    pub split: SplitName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledCurve {
    pub label: String,
    pub seed: u64,
    pub curve: TrainingCurve,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seeds: Vec<u64>,
    pub dataset_hash: String,
    pub config: serde_json::Value,
    /// Published figures for context only; never compared against.
    pub reference: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ReportKind,
    pub rows: Vec<EvalRow>,
    pub curves: Vec<LabelledCurve>,
    pub meta: ReportMeta,
}

pub const CSV_HEADER: &str = "method,duration_s,t_back,scope,crmse_deg,seed";

impl EvalReport {
    pub fn new(kind: ReportKind) -> Self {
        Self {
            kind,
            rows: Vec::new(),
            curves: Vec::new(),
            meta: ReportMeta::default(),
        }
    }

    /// Concatenates reports of the same kind, e.g. one per seed.
    pub fn merge(reports: Vec<EvalReport>) -> Result<EvalReport> {
        let mut it = reports.into_iter();
        let mut out = it.next().ok_or(Error::EmptyBatch)?;
        for r in it {
            if r.kind != out.kind {
                return Err(Error::shape("cannot merge reports of different kinds"));
            }
            out.rows.extend(r.rows);
            out.curves.extend(r.curves);
            for s in r.meta.seeds {
                if !out.meta.seeds.contains(&s) {
                    out.meta.seeds.push(s);
                }
            }
            out.meta.notes.extend(r.meta.notes);
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            let t_back = r.t_back.map(|t| t.to_string()).unwrap_or_default();
            let scope = r.scope.map(|s| s.as_str()).unwrap_or("");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.method, r.duration_s, t_back, scope, r.crmse_deg, r.seed
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            file: "report".into(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a EvalRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Mean CRMSE of `method` over all its rows (seeds), if any.
    pub fn mean_crmse(&self, method: &str) -> Option<f64> {
        let v: Vec<f64> = self.rows_for(method).map(|r| r.crmse_deg).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Mean CRMSE of `method` grouped by a key such as duration or `t_back`, in key order.
    pub fn mean_by<K: Ord>(&self, method: &str, key: impl Fn(&EvalRow) -> K) -> Vec<(K, f64)> {
        let mut groups: BTreeMap<K, (f64, usize)> = BTreeMap::new();
        for r in self.rows_for(method) {
            let e = groups.entry(key(r)).or_insert((0.0, 0));
            e.0 += r.crmse_deg;
            e.1 += 1;
        }
        groups.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }
}

/// SHA-256 over labels, rates and samples of every split, in split order.
pub fn dataset_hash(data: &DatasetSplit) -> String {
    let mut h = Sha256::new();
    for name in SplitName::ALL {
        let seqs = data.get(name);
        h.update(name.as_str().as_bytes());
        h.update((seqs.len() as u64).to_le_bytes());
        for s in seqs {
            h.update(s.heading_label.unwrap_or(f64::NAN).to_le_bytes());
            h.update(s.sample_rate.to_le_bytes());
            h.update((s.len() as u64).to_le_bytes());
            for row in s.rows() {
                for v in row {
                    h.update(v.to_le_bytes());
                }
            }
        }
    }
    hex::encode(h.finalize())
}
