use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{TimeSequence, CHANNELS};

/// Dataset-level input scaling for the heading model: per-channel offset and one pooled
/// scale, fitted on the training split. Per-sequence means carry the heading, so they
/// are deliberately left in the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub mean: [f64; CHANNELS],
    pub scale: f64,
}

impl InputScaler {
    pub fn fit(seqs: &[TimeSequence]) -> Result<Self> {
        let count: usize = seqs.iter().map(|s| s.len()).sum();
        if count == 0 {
            return Err(Error::EmptyBatch);
        }
        let mut mean = [0.0; CHANNELS];
        for row in seqs.iter().flat_map(|s| s.rows()) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean = mean.map(|m| m / count as f64);
        let mut ss = 0.0;
        for row in seqs.iter().flat_map(|s| s.rows()) {
            for (m, v) in mean.iter().zip(row) {
                ss += (v - m).powi(2);
            }
        }
        let scale = (ss / (count * CHANNELS) as f64).sqrt();
        if !(scale > 1e-18) {
            return Err(Error::DegenerateSequence { channel: 0, std: scale });
        }
        Ok(Self { mean, scale })
    }

    /// Flattened, scaled copy of one sequence.
    pub fn transform(&self, seq: &TimeSequence) -> Vec<f64> {
        let inv = 1.0 / self.scale;
        seq.rows()
            .flat_map(|row| (0..CHANNELS).map(move |c| (row[c] - self.mean[c]) * inv))
            .collect()
    }

    /// Batch-major stack of scaled sequences, which must share one length.
    pub fn transform_batch(&self, seqs: &[&TimeSequence]) -> Result<(Vec<f64>, usize)> {
        let time = seqs.first().map(|s| s.len()).ok_or(Error::EmptyBatch)?;
        let mut out = Vec::with_capacity(seqs.len() * time * CHANNELS);
        for s in seqs {
            if s.len() != time {
                return Err(Error::shape("sequences in a batch must share one length"));
            }
            out.extend(self.transform(s));
        }
        Ok((out, time))
    }
}
