//! Dataset construction: clean earth-rate sequences, sensor noise, augmentation,
//! down-sampling, flattening and train/val/test splits.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{self, AngularRate, EarthModel, EulerAngles, GeoPosition};
use crate::seeds;

pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Synthetic,
    Recorded,
}

/// A fixed-rate three-axis gyro recording, rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSequence {
    samples: Vec<[f64; CHANNELS]>,
    pub sample_rate: f64,
    pub heading_label: Option<f64>,
    pub latitude: f64,
    pub source: SourceTag,
}

impl TimeSequence {
    pub fn new(
        samples: Vec<[f64; CHANNELS]>,
        sample_rate: f64,
        heading_label: Option<f64>,
        latitude: f64,
        source: SourceTag,
    ) -> Self {
        debug_assert!(sample_rate > 0.0);
        Self {
            samples,
            sample_rate,
            heading_label: heading_label.map(geo::wrap_two_pi),
            latitude,
            source,
        }
    }

    /// Noise-free stationary, leveled recording at `heading` and `latitude`.
    pub fn clean(heading: f64, latitude: f64, duration_s: f64, rate_hz: f64) -> Result<Self> {
        let n = sample_count(duration_s, rate_hz)?;
        let row = geo::earth_rate_in_body(
            EulerAngles::leveled(heading),
            GeoPosition::at_latitude(latitude),
            EarthModel,
        )
        .to_array();
        Ok(Self::new(
            vec![row; n],
            rate_hz,
            Some(heading),
            latitude,
            SourceTag::Synthetic,
        ))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn samples(&self) -> &[[f64; CHANNELS]] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [[f64; CHANNELS]] {
        &mut self.samples
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64; CHANNELS]> {
        self.samples.iter()
    }

    pub fn with_samples(&self, samples: Vec<[f64; CHANNELS]>) -> Self {
        Self {
            samples,
            ..self.clone()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().flatten().all(|v| v.is_finite())
    }

    /// Row-major interleaving `[t0x, t0y, t0z, t1x, ...]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.samples.iter().flatten().copied().collect()
    }

    /// Inverse of [`flatten`](Self::flatten); metadata is taken from `like`.
    pub fn unflatten(values: &[f64], n_time: usize, like: &TimeSequence) -> Result<Self> {
        let samples = unflatten_rows(values, n_time)?;
        Ok(like.with_samples(samples))
    }
}

fn sample_count(duration_s: f64, rate_hz: f64) -> Result<usize> {
    let n = duration_s * rate_hz;
    if !(n >= 1.0) || (n - n.round()).abs() > 1e-9 {
        return Err(Error::config(
            "duration_s * rate_hz",
            format!("must be a positive integer, got {n}"),
        ));
    }
    Ok(n.round() as usize)
}

pub fn flatten(seq: &TimeSequence) -> Vec<f64> {
    seq.flatten()
}

pub fn unflatten_rows(values: &[f64], n_time: usize) -> Result<Vec<[f64; CHANNELS]>> {
    if values.len() != n_time * CHANNELS {
        return Err(Error::shape(format!(
            "expected {} values for {} steps of {} channels, got {}",
            n_time * CHANNELS,
            n_time,
            CHANNELS,
            values.len()
        )));
    }
    Ok(values.chunks_exact(CHANNELS).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Noise-free rows from the leveled earth-rate model.
pub fn generate_clean_sequence(heading: f64, latitude: f64, duration_s: f64, rate_hz: f64) -> Result<TimeSequence> {
    TimeSequence::clean(heading, latitude, duration_s, rate_hz)
}

/// Additive gyro error model: a repeatable sensor bias, a run-to-run bias drawn once per
/// sequence and channel, and white noise. All in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub white_noise_std: f64,
    pub constant_bias_std: f64,
    /// Bias that is identical for every sequence recorded by the same sensor unit.
    pub fixed_bias: [f64; CHANNELS],
    pub seed: u64,
}

/// Tactical-grade gyro error budget used for evaluation: 0.05 deg/s white noise at the
/// source rate, 1e-4 deg/s run-to-run bias and a repeatable horizontal bias of
/// (3e-4, -2e-4) deg/s.
impl Default for NoiseModel {
    fn default() -> Self {
        let d = std::f64::consts::PI / 180.0;
        Self {
            white_noise_std: 0.05 * d,
            constant_bias_std: 1e-4 * d,
            fixed_bias: [3e-4 * d, -2e-4 * d, 0.0],
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn white(std: f64, seed: u64) -> Self {
        Self {
            white_noise_std: std,
            constant_bias_std: 0.0,
            fixed_bias: [0.0; CHANNELS],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.fixed_bias.iter().all(|b| b.is_finite());
        if !(self.white_noise_std >= 0.0 && self.white_noise_std.is_finite()) {
            return Err(Error::config("noise.white_noise_std", "must be finite and >= 0"));
        }
        if !(self.constant_bias_std >= 0.0 && self.constant_bias_std.is_finite()) {
            return Err(Error::config("noise.constant_bias_std", "must be finite and >= 0"));
        }
        if !finite {
            return Err(Error::config("noise.fixed_bias", "must be finite"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

pub fn add_sensor_noise(seq: &TimeSequence, noise: &NoiseModel) -> TimeSequence {
    let mut rng = seeds::rng(noise.seed);
    let mut bias = noise.fixed_bias;
    for b in bias.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        if noise.constant_bias_std > 0.0 {
            *b += noise.constant_bias_std * z;
        }
    }
    let mut out = seq.clone();
    let white = noise.white_noise_std;
    for row in out.samples_mut() {
        for (v, b) in row.iter_mut().zip(bias) {
            let z: f64 = StandardNormal.sample(&mut rng);
            if b != 0.0 {
                *v += b;
            }
            if white > 0.0 {
                *v += white * z;
            }
        }
    }
    out
}

/// Re-expresses a leveled recording at `count` headings spread evenly over
/// `[-half_range, +half_range]` around its label by rotating the horizontal channels.
pub fn augment_by_heading_rotation(seq: &TimeSequence, count: usize, half_range: f64) -> Result<Vec<TimeSequence>> {
    let label = seq.heading_label.ok_or(Error::MissingLabel)?;
    let offsets: Vec<f64> = match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count)
            .map(|k| -half_range + 2.0 * half_range * k as f64 / (count - 1) as f64)
            .collect(),
    };
    Ok(offsets
        .into_iter()
        .map(|delta| {
            if delta == 0.0 {
                return seq.clone();
            }
            let (s, c) = delta.sin_cos();
            let samples = seq
                .rows()
                .map(|&[x, y, z]| [c * x + s * y, -s * x + c * y, z])
                .collect();
            let mut out = seq.with_samples(samples);
            out.heading_label = Some(geo::wrap_two_pi(label + delta));
            out
        })
        .collect())
}

/// Block-mean down-sampling by an integer rate ratio.
pub fn downsample(seq: &TimeSequence, target_rate: f64) -> Result<TimeSequence> {
    let ratio = seq.sample_rate / target_rate;
    let rounded = ratio.round();
    if !(target_rate > 0.0) || rounded < 1.0 || (ratio - rounded).abs() > 1e-9 {
        return Err(Error::RateMismatch {
            source_hz: seq.sample_rate,
            target_hz: target_rate,
        });
    }
    let r = rounded as usize;
    if !seq.len().is_multiple_of(r) {
        return Err(Error::shape(format!(
            "{} samples do not split into blocks of {r}",
            seq.len()
        )));
    }
    let inv = 1.0 / r as f64;
    let samples = seq
        .samples()
        .chunks_exact(r)
        .map(|block| {
            let mut acc = [0.0; CHANNELS];
            for row in block {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
            acc.map(|a| a * inv)
        })
        .collect();
    let mut out = seq.with_samples(samples);
    out.sample_rate = target_rate;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatio {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatio {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(*p >= 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("split", "ratios must be non-negative and sum to 1"));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Val, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

/// Interleaved split assignment over an ordered list: item `i` goes to the split whose
/// running quota `ratio * (i + 1)` is furthest ahead of its assigned count. On a list
/// sorted by heading every split therefore covers the whole circle.
pub fn stratified_assignment(n: usize, ratio: &SplitRatio) -> Vec<SplitName> {
    let r = ratio.as_array();
    let mut counts = [0usize; 3];
    (0..n)
        .map(|i| {
            let mut best = 0;
            let mut best_deficit = f64::NEG_INFINITY;
            for k in 0..3 {
                let deficit = r[k] * (i + 1) as f64 - counts[k] as f64;
                if deficit > best_deficit + 1e-12 {
                    best = k;
                    best_deficit = deficit;
                }
            }
            counts[best] += 1;
            SplitName::ALL[best]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<TimeSequence>,
    pub val: Vec<TimeSequence>,
    pub test: Vec<TimeSequence>,
    pub ratio: SplitRatio,
}

impl DatasetSplit {
    pub fn from_assignment(sequences: Vec<TimeSequence>, assignment: &[SplitName], ratio: SplitRatio) -> Self {
        let mut split = DatasetSplit {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
            ratio,
        };
        for (seq, name) in sequences.into_iter().zip(assignment) {
            split.get_mut(*name).push(seq);
        }
        split
    }

    pub fn get(&self, name: SplitName) -> &[TimeSequence] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }

    pub fn get_mut(&mut self, name: SplitName) -> &mut Vec<TimeSequence> {
        match name {
            SplitName::Train => &mut self.train,
            SplitName::Val => &mut self.val,
            SplitName::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub increment_deg: f64,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub latitude_deg: f64,
    #[serde(default)]
    pub split: SplitRatio,
    /// Noise is synthesized at this rate and block-averaged down to `rate_hz`.
    pub noise_source_rate_hz: f64,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            increment_deg: 0.5,
            duration_s: 100.0,
            rate_hz: 3.0,
            latitude_deg: 0.0,
            split: SplitRatio::default(),
            noise_source_rate_hz: 600.0,
            noise: None,
        }
    }
}

impl SyntheticConfig {
    pub fn heading_count(&self) -> Result<usize> {
        let n = 360.0 / self.increment_deg;
        if !(self.increment_deg > 0.0) || (n - n.round()).abs() > 1e-9 {
            return Err(Error::config(
                "dataset.increment_deg",
                format!("{} does not divide 360", self.increment_deg),
            ));
        }
        Ok(n.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.heading_count()?;
        sample_count(self.duration_s, self.rate_hz)?;
        self.split.validate()?;
        if !(-90.0..=90.0).contains(&self.latitude_deg) {
            return Err(Error::config("dataset.latitude_deg", "must lie in [-90, 90]"));
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
            let ratio = self.noise_source_rate_hz / self.rate_hz;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
                return Err(Error::config(
                    "dataset.noise_source_rate_hz",
                    "must be an integer multiple of rate_hz",
                ));
            }
        }
        Ok(())
    }
}

/// Sequences at evenly spaced headings, optionally corrupted, split by interleaving.
///
/// Sequence `i` draws its noise from seed `noise.seed + i`.
pub fn generate_synthetic_dataset(cfg: &SyntheticConfig) -> Result<DatasetSplit> {
    cfg.validate()?;
    let n = cfg.heading_count()?;
    let lat = cfg.latitude_deg.to_radians();
    let sequences = (0..n)
        .map(|i| {
            let heading = (i as f64 * cfg.increment_deg).to_radians();
            match &cfg.noise {
                None => generate_clean_sequence(heading, lat, cfg.duration_s, cfg.rate_hz),
                Some(noise) => {
                    let raw = generate_clean_sequence(heading, lat, cfg.duration_s, cfg.noise_source_rate_hz)?;
                    let noisy = add_sensor_noise(&raw, &noise.with_seed(noise.seed.wrapping_add(i as u64)));
                    downsample(&noisy, cfg.rate_hz)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let assignment = stratified_assignment(n, &cfg.split);
    Ok(DatasetSplit::from_assignment(sequences, &assignment, cfg.split))
}

/// Mean earth-rate row of a sequence.
pub fn mean_rate(seq: &TimeSequence) -> AngularRate {
    let mut acc = [0.0; CHANNELS];
    for row in seq.rows() {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let inv = 1.0 / seq.len().max(1) as f64;
    AngularRate::new(acc[0] * inv, acc[1] * inv, acc[2] * inv)
}
