use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{TimeSequence, CHANNELS};

const MIN_STD: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScope {
    /// Each time step is normalized by the mean and std of its own three channels.
    PerSample,
    /// Each channel is normalized by its mean and std over the whole sequence.
    PerSequence,
}

impl NormScope {
    pub const ALL: [NormScope; 2] = [NormScope::PerSample, NormScope::PerSequence];

    pub fn as_str(self) -> &'static str {
        match self {
            NormScope::PerSample => "per_sample",
            NormScope::PerSequence => "per_sequence",
        }
    }
}

/// Statistics needed to undo a normalization. `mean` and `std` hold one row for the
/// per-sequence scope and one row per time step for the per-sample scope (where the
/// three entries of a row are equal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub scope: NormScope,
    pub mean: Vec<[f64; CHANNELS]>,
    pub std: Vec<[f64; CHANNELS]>,
}

impl NormStats {
    fn row(&self, i: usize) -> usize {
        match self.scope {
            NormScope::PerSequence => 0,
            NormScope::PerSample => i,
        }
    }

    fn expected_len(&self, n_time: usize) -> usize {
        match self.scope {
            NormScope::PerSequence => 1,
            NormScope::PerSample => n_time,
        }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn normalize(seq: &TimeSequence, scope: NormScope) -> Result<(TimeSequence, NormStats)> {
    if seq.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let (mean, std) = match scope {
        NormScope::PerSequence => {
            let mut mean = [0.0; CHANNELS];
            let mut std = [0.0; CHANNELS];
            for c in 0..CHANNELS {
                let column: Vec<f64> = seq.rows().map(|r| r[c]).collect();
                let (m, s) = mean_std(&column);
                if !(s >= MIN_STD) {
                    return Err(Error::DegenerateSequence { channel: c, std: s });
                }
                mean[c] = m;
                std[c] = s;
            }
            (vec![mean], vec![std])
        }
        NormScope::PerSample => {
            let mut means = Vec::with_capacity(seq.len());
            let mut stds = Vec::with_capacity(seq.len());
            for row in seq.rows() {
                let (m, s) = mean_std(row);
                if !(s >= MIN_STD) {
                    return Err(Error::DegenerateSequence { channel: 0, std: s });
                }
                means.push([m; CHANNELS]);
                stds.push([s; CHANNELS]);
            }
            (means, stds)
        }
    };
    let stats = NormStats { scope, mean, std };
    let samples = seq
        .rows()
        .enumerate()
        .map(|(i, row)| {
            let r = stats.row(i);
            std::array::from_fn(|c| (row[c] - stats.mean[r][c]) / stats.std[r][c])
        })
        .collect();
    Ok((seq.with_samples(samples), stats))
}

pub fn denormalize(seq: &TimeSequence, stats: &NormStats) -> Result<TimeSequence> {
    let want = stats.expected_len(seq.len());
    if stats.mean.len() != want || stats.std.len() != want {
        return Err(Error::shape(format!(
            "{} statistics rows for a {}-step sequence under {} scope",
            stats.mean.len(),
            seq.len(),
            stats.scope.as_str()
        )));
    }
    let samples = seq
        .rows()
        .enumerate()
        .map(|(i, row)| {
            let r = stats.row(i);
            std::array::from_fn(|c| row[c] * stats.std[r][c] + stats.mean[r][c])
        })
        .collect();
    Ok(seq.with_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{add_sensor_noise, NoiseModel};

    fn noisy() -> TimeSequence {
        let clean = TimeSequence::clean(0.7, 0.4, 20.0, 3.0).unwrap();
        add_sensor_noise(&clean, &NoiseModel::white(1e-3, 9))
    }

    #[test]
    fn constant_sequence_is_degenerate() {
        let clean = TimeSequence::clean(0.7, 0.4, 20.0, 3.0).unwrap();
        assert!(matches!(
            normalize(&clean, NormScope::PerSequence),
            Err(Error::DegenerateSequence { .. })
        ));
        let flat = clean.with_samples(vec![[2.0; 3]; 10]);
        assert!(matches!(
            normalize(&flat, NormScope::PerSample),
            Err(Error::DegenerateSequence { .. })
        ));
    }

    #[test]
    fn per_sequence_moments() {
        let (n, _) = normalize(&noisy(), NormScope::PerSequence).unwrap();
        for c in 0..CHANNELS {
            let column: Vec<f64> = n.rows().map(|r| r[c]).collect();
            let (m, s) = mean_std(&column);
            assert!(m.abs() < 1e-12);
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn round_trip_both_scopes() {
        let seq = noisy();
        for scope in NormScope::ALL {
            let (n, stats) = normalize(&seq, scope).unwrap();
            let back = denormalize(&n, &stats).unwrap();
            for (a, b) in back.rows().zip(seq.rows()) {
                for c in 0..CHANNELS {
                    assert!((a[c] - b[c]).abs() <= 1e-12 * b[c].abs().max(1e-6), "{scope:?}");
                }
            }
        }
    }

    #[test]
    fn zero_input_denormalizes_to_means() {
        let seq = noisy();
        let (n, stats) = normalize(&seq, NormScope::PerSequence).unwrap();
        let zero = n.with_samples(vec![[0.0; 3]; n.len()]);
        let out = denormalize(&zero, &stats).unwrap();
        assert!(out.rows().all(|r| *r == stats.mean[0]));
    }

    #[test]
    fn stats_shape_checked() {
        let seq = noisy();
        let (n, mut stats) = normalize(&seq, NormScope::PerSample).unwrap();
        assert_eq!(stats.mean.len(), seq.len());
        stats.mean.pop();
        assert!(matches!(denormalize(&n, &stats), Err(Error::Shape(_))));
    }
}
