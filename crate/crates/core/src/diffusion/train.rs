use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::denoiser::{DenoiserArch, DenoiserNetwork};
use super::schedule::{forward_noise, NoiseSchedule};
use super::svd::svd_mse_loss_grad;
use crate::error::{Error, Result};
use crate::nn::Adam;
use crate::seeds::{self, Purpose};
use crate::synth::{TimeSequence, CHANNELS};
use crate::training::{EarlyStopping, EpochRecord, TrainingCurve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionTrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    pub svd_threshold: f64,
    /// Column count of the matrix each flattened sequence is reshaped into for the
    /// spectral filter. 3 keeps the natural `[n_time x 3]` layout.
    pub svd_columns: usize,
    pub arch: DenoiserArch,
}

impl Default for DiffusionTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 50,
            learning_rate: 1e-3,
            max_epochs: 100,
            patience: 20,
            svd_threshold: 0.1,
            svd_columns: CHANNELS,
            arch: DenoiserArch::default(),
        }
    }
}

impl DiffusionTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("denoiser.batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("denoiser.learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.svd_threshold) {
            return Err(Error::config("denoiser.svd_threshold", "must lie in [0, 1)"));
        }
        if self.svd_columns == 0 {
            return Err(Error::config("denoiser.svd_columns", "must be positive"));
        }
        self.arch.validate()
    }
}

pub struct TrainedDenoiser {
    pub net: DenoiserNetwork,
    pub curve: TrainingCurve,
    pub best_epoch: usize,
}

fn sequence_matrix(seqs: &[TimeSequence]) -> Result<(Vec<Vec<f64>>, usize)> {
    let time = seqs.first().map(|s| s.len()).ok_or(Error::EmptyBatch)?;
    if seqs.iter().any(|s| s.len() != time) {
        return Err(Error::shape("all training sequences must have the same length"));
    }
    Ok((seqs.iter().map(|s| s.flatten()).collect(), time))
}

fn standard_normal<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

struct Batch {
    x_t: Vec<f64>,
    eps: Vec<f64>,
    steps: Vec<usize>,
}

fn noised_batch<R: Rng>(data: &[Vec<f64>], idx: &[usize], sched: &NoiseSchedule, rng: &mut R) -> Result<Batch> {
    let mut batch = Batch {
        x_t: Vec::new(),
        eps: Vec::new(),
        steps: Vec::with_capacity(idx.len()),
    };
    for &i in idx {
        let t = rng.random_range(1..=sched.steps());
        let eps = standard_normal(data[i].len(), rng);
        batch.x_t.extend(forward_noise(&data[i], t, &eps, sched)?);
        batch.eps.extend(eps);
        batch.steps.push(t);
    }
    Ok(batch)
}

/// Training objective on `ε` for one batch. Returns the loss and, if requested, the
/// parameter gradient.
fn batch_loss(
    net: &DenoiserNetwork,
    batch: &Batch,
    time: usize,
    cfg: &DiffusionTrainConfig,
    grads: Option<&mut [f64]>,
) -> Result<f64> {
    let per = time * CHANNELS;
    if !per.is_multiple_of(cfg.svd_columns) {
        return Err(Error::config(
            "denoiser.svd_columns",
            format!(
                "{per} values per sequence do not reshape into {} columns",
                cfg.svd_columns
            ),
        ));
    }
    let rows = per / cfg.svd_columns;
    let (pred, cache) = net.forward(&batch.x_t, &batch.steps, time)?;
    let (loss, d_pred) = svd_mse_loss_grad(
        &pred,
        &batch.eps,
        rows,
        cfg.svd_columns,
        cfg.svd_threshold,
        grads.is_some(),
    )?;
    if let Some(g) = grads {
        net.backward(&cache, &d_pred, g);
    }
    Ok(loss)
}

/// Trains the noise predictor on clean (already normalized) sequences: draw a step
/// uniformly, noise the sample in closed form, regress the noise under the spectrally
/// filtered MSE. Returns the weights with the best validation loss.
///
/// Validation uses one fixed `(t, ε)` draw per sequence so epochs are comparable.
pub fn train_denoiser(
    train: &[TimeSequence],
    val: &[TimeSequence],
    cfg: &DiffusionTrainConfig,
    sched: &NoiseSchedule,
    base_seed: u64,
) -> Result<TrainedDenoiser> {
    cfg.validate()?;
    let (train_data, time) = sequence_matrix(train)?;
    let (val_data, val_time) = sequence_matrix(val)?;
    if val_time != time {
        return Err(Error::shape("train and validation sequences differ in length"));
    }
    let mut net = DenoiserNetwork::new(cfg.arch, seeds::derive(base_seed, Purpose::Init))?;
    let mut opt = Adam::new(net.param_count());
    let mut grads = vec![0.0; net.param_count()];

    let mut val_rng = seeds::rng(seeds::derive(base_seed, Purpose::Validation));
    let val_batches: Vec<Batch> = (0..val_data.len())
        .collect::<Vec<_>>()
        .chunks(cfg.batch_size)
        .map(|idx| noised_batch(&val_data, idx, sched, &mut val_rng))
        .collect::<Result<_>>()?;

    let mut curve = TrainingCurve::new("svd_mse");
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = net.params().to_vec();
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 0..cfg.max_epochs {
        let mut shuffle_rng = seeds::rng_for(base_seed, Purpose::Shuffle, epoch as u64);
        let mut noise_rng = seeds::rng_for(base_seed, Purpose::DiffusionNoise, epoch as u64);
        order.shuffle(&mut shuffle_rng);
        let mut train_loss = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch = noised_batch(&train_data, idx, sched, &mut noise_rng)?;
            grads.fill(0.0);
            let loss = batch_loss(&net, &batch, time, cfg, Some(&mut grads))?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            opt.step(net.params_mut(), &grads, cfg.learning_rate);
            train_loss += loss * idx.len() as f64;
        }
        train_loss /= train_data.len() as f64;

        let mut val_loss = 0.0;
        for batch in &val_batches {
            val_loss += batch_loss(&net, batch, time, cfg, None)? * batch.steps.len() as f64;
        }
        val_loss /= val_data.len() as f64;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        curve.push(EpochRecord {
            epoch,
            train: train_loss,
            val: val_loss,
            learning_rate: cfg.learning_rate,
        });
        if stopper.observe(epoch, val_loss) {
            best.copy_from_slice(net.params());
        }
        if stopper.should_stop(epoch) {
            break;
        }
    }
    net.params_mut().copy_from_slice(&best);
    Ok(TrainedDenoiser {
        net,
        curve,
        best_epoch: stopper.best_epoch(),
    })
}
