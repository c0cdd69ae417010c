use serde::{Deserialize, Serialize};

use super::norm::{denormalize, normalize, NormScope, NormStats};
use crate::diffusion::{denoise_batch, DenoiserNetwork, NoiseSchedule};
use crate::error::{Error, Result};
use crate::heading::{predict_heading, HeadingModel, HeadingPrediction, SequencePreprocessor};
use crate::seeds::{self, Purpose, Rng};
use crate::synth::{TimeSequence, CHANNELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Reverse diffusion stops at this step; `t_back = T` disables the denoiser.
    pub t_back: usize,
    pub scope: NormScope,
    /// Sequences denoised together; has no effect on results.
    pub denoise_batch: usize,
    /// In the `t_back` sweep, evaluate one heading model instead of retraining per value.
    pub sweep_reuse_heading: bool,
    pub sweep_values: Vec<usize>,
    pub classical_durations_s: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            t_back: 950,
            scope: NormScope::PerSequence,
            denoise_batch: 64,
            sweep_reuse_heading: false,
            sweep_values: vec![100, 300, 500, 700, 900, 950, 980],
            classical_durations_s: (1..=10).map(|k| 10.0 * k as f64).collect(),
        }
    }
}

pub(crate) fn check_t_back(t_back: usize, sched: &NoiseSchedule, field: &'static str) -> Result<()> {
    if t_back > sched.steps() {
        return Err(Error::config(
            field,
            format!("{t_back} exceeds the schedule length {}", sched.steps()),
        ));
    }
    Ok(())
}

impl PipelineConfig {
    pub fn validate(&self, sched: &NoiseSchedule) -> Result<()> {
        check_t_back(self.t_back, sched, "pipeline.t_back")?;
        for &v in &self.sweep_values {
            check_t_back(v, sched, "pipeline.sweep_values")?;
        }
        if self.denoise_batch == 0 {
            return Err(Error::config("pipeline.denoise_batch", "must be at least 1"));
        }
        if self.classical_durations_s.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::config(
                "pipeline.classical_durations_s",
                "durations must be positive",
            ));
        }
        Ok(())
    }
}

/// Normalize, run the reverse diffusion from `t_back`, de-normalize.
///
/// Sequence `i` of stream `s` draws its reverse-process noise from its own generator, so
/// outputs do not depend on batching. With `t_back = T` inputs pass through untouched.
#[derive(Debug, Clone)]
pub struct DenoisePreprocessor<'a> {
    pub net: &'a DenoiserNetwork,
    pub sched: &'a NoiseSchedule,
    pub t_back: usize,
    pub scope: NormScope,
    pub batch: usize,
    pub seed: u64,
}

/// Intermediate stages of one pass through the denoiser.
#[derive(Debug, Clone)]
pub struct DenoiseTrace {
    pub normalized: TimeSequence,
    pub stats: NormStats,
    pub denoised: TimeSequence,
    pub output: TimeSequence,
}

impl<'a> DenoisePreprocessor<'a> {
    pub fn new(net: &'a DenoiserNetwork, sched: &'a NoiseSchedule, cfg: &PipelineConfig, seed: u64) -> Self {
        Self {
            net,
            sched,
            t_back: cfg.t_back,
            scope: cfg.scope,
            batch: cfg.denoise_batch.max(1),
            seed,
        }
    }

    pub fn with_t_back(&self, t_back: usize) -> Self {
        Self { t_back, ..self.clone() }
    }

    pub fn with_scope(&self, scope: NormScope) -> Self {
        Self { scope, ..self.clone() }
    }

    pub fn is_identity(&self) -> bool {
        self.t_back >= self.sched.steps()
    }

    fn rng(&self, stream: u64, index: usize) -> Rng {
        let base = seeds::splitmix64(self.seed.wrapping_add(stream));
        seeds::rng_for(base, Purpose::DiffusionNoise, index as u64)
    }

    /// Denoises `seqs`, which form items `first..first + seqs.len()` of `stream`.
    pub fn trace(&self, seqs: &[TimeSequence], stream: u64, first: usize) -> Result<Vec<DenoiseTrace>> {
        check_t_back(self.t_back, self.sched, "pipeline.t_back")?;
        let mut out = Vec::with_capacity(seqs.len());
        for (c, chunk) in seqs.chunks(self.batch).enumerate() {
            let time = chunk[0].len();
            if chunk.iter().any(|s| s.len() != time) {
                return Err(Error::shape("sequences denoised together must share one length"));
            }
            let mut normalized = Vec::with_capacity(chunk.len());
            let mut flat = Vec::with_capacity(chunk.len() * time * CHANNELS);
            for s in chunk {
                let (n, stats) = normalize(s, self.scope)?;
                flat.extend(n.flatten());
                normalized.push((n, stats));
            }
            let mut rngs: Vec<Rng> = (0..chunk.len())
                .map(|k| self.rng(stream, first + c * self.batch + k))
                .collect();
            let den = denoise_batch(self.net, &flat, time, self.t_back, self.sched, &mut rngs)?;
            for ((n, stats), values) in normalized.into_iter().zip(den.chunks_exact(time * CHANNELS)) {
                let denoised = TimeSequence::unflatten(values, time, &n)?;
                let output = denormalize(&denoised, &stats)?;
                out.push(DenoiseTrace {
                    normalized: n,
                    stats,
                    denoised,
                    output,
                });
            }
        }
        Ok(out)
    }
}

impl SequencePreprocessor for DenoisePreprocessor<'_> {
    fn apply(&self, seqs: &[TimeSequence], stream: u64) -> Result<Vec<TimeSequence>> {
        if self.is_identity() {
            return Ok(seqs.to_vec());
        }
        Ok(self.trace(seqs, stream, 0)?.into_iter().map(|t| t.output).collect())
    }
}

/// Stream used for test-time denoising.
pub const TEST_STREAM: u64 = 2;

#[derive(Debug, Clone)]
pub struct EndToEnd {
    pub prediction: HeadingPrediction,
    /// `None` when the denoiser is bypassed.
    pub trace: Option<DenoiseTrace>,
}

/// Raw sequence to heading: optional denoising stage, then the heading model (which
/// applies its own input scaling).
pub fn end_to_end_heading(
    raw: &TimeSequence,
    denoiser: Option<&DenoisePreprocessor<'_>>,
    heading: &HeadingModel,
    index: usize,
) -> Result<EndToEnd> {
    match denoiser {
        Some(d) if !d.is_identity() => {
            let trace = d.trace(std::slice::from_ref(raw), TEST_STREAM, index)?.remove(0);
            let prediction = predict_heading(heading, &trace.output, index)?;
            Ok(EndToEnd {
                prediction,
                trace: Some(trace),
            })
        }
        _ => Ok(EndToEnd {
            prediction: predict_heading(heading, raw, index)?,
            trace: None,
        }),
    }
}
