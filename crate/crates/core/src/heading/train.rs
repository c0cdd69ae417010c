use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{crmse, cyclic_mse_grad};
use super::lr::lr_at_epoch;
use super::network::{HeadingArch, HeadingNetwork, Variant};
use super::scaler::InputScaler;
use crate::error::{Error, Result};
use crate::nn::Adam;
use crate::seeds::{self, Purpose};
use crate::synth::{TimeSequence, CHANNELS};
use crate::training::{EarlyStopping, EpochRecord, TrainingCurve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadingTrainConfig {
    pub variant: Variant,
    pub eta_max: f64,
    pub eta_min: f64,
    /// Epoch budget `N`; also the horizon of the learning-rate decay.
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    pub arch: HeadingArch,
}

impl HeadingTrainConfig {
    pub fn enhanced() -> Self {
        Self {
            variant: Variant::Enhanced,
            eta_max: 0.005,
            eta_min: 0.0005,
            epochs: 300,
            batch_size: 32,
            patience: 30,
            arch: HeadingArch::for_variant(Variant::Enhanced),
        }
    }

    /// Constant learning rate `eta_max`, batch size 100, no dropout.
    pub fn baseline() -> Self {
        Self {
            variant: Variant::Baseline,
            eta_min: 0.005,
            batch_size: 100,
            arch: HeadingArch::for_variant(Variant::Baseline),
            ..Self::enhanced()
        }
    }

    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::Baseline => Self::baseline(),
            Variant::Enhanced => Self::enhanced(),
        }
    }

    pub fn learning_rate(&self, epoch: usize) -> Result<f64> {
        match self.variant {
            Variant::Baseline => Ok(self.eta_max),
            Variant::Enhanced => lr_at_epoch(epoch, self.eta_max, self.eta_min, self.epochs),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("heading.batch_size", "must be at least 1"));
        }
        self.learning_rate(0)?;
        self.arch.validate()
    }
}

impl Default for HeadingTrainConfig {
    fn default() -> Self {
        Self::enhanced()
    }
}

/// A frozen transformation applied to every sequence before the heading network sees
/// it, during training and at inference. `stream` separates the random streams of the
/// train (0), validation (1) and test (2) sets.
pub trait SequencePreprocessor {
    fn apply(&self, seqs: &[TimeSequence], stream: u64) -> Result<Vec<TimeSequence>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingPrediction {
    pub heading: f64,
    pub source_id: usize,
}

/// Scaler plus network: everything needed to map a (preprocessed) sequence to a heading.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadingModel {
    pub net: HeadingNetwork,
    pub scaler: InputScaler,
}

impl HeadingModel {
    pub fn predict_batch(&self, seqs: &[TimeSequence]) -> Result<Vec<f64>> {
        let refs: Vec<&TimeSequence> = seqs.iter().collect();
        let (x, time) = self.scaler.transform_batch(&refs)?;
        self.net.infer(&x, seqs.len(), time)
    }
}

/// Heading of one sequence in inference mode.
pub fn predict_heading(model: &HeadingModel, seq: &TimeSequence, source_id: usize) -> Result<HeadingPrediction> {
    if seq.is_empty() {
        return Err(Error::shape("empty sequence"));
    }
    let heading = model.net.infer(&model.scaler.transform(seq), 1, seq.len())?[0];
    Ok(HeadingPrediction { heading, source_id })
}

/// Same as [`predict_heading`] for a flattened `[time x 3]` input.
pub fn predict_heading_flat(model: &HeadingModel, values: &[f64], like: &TimeSequence) -> Result<HeadingPrediction> {
    if !values.len().is_multiple_of(CHANNELS) {
        return Err(Error::shape(format!("{} values are not whole rows of 3", values.len())));
    }
    let seq = TimeSequence::unflatten(values, values.len() / CHANNELS, like)?;
    predict_heading(model, &seq, 0)
}

pub struct TrainedHeading {
    pub model: HeadingModel,
    pub curve: TrainingCurve,
    pub best_epoch: usize,
}

fn labels(seqs: &[TimeSequence]) -> Result<Vec<f64>> {
    seqs.iter()
        .map(|s| s.heading_label.ok_or(Error::MissingLabel))
        .collect()
}

/// Mini-batch training on the squared cyclic error. Curves record CRMSE in degrees; the
/// returned model is the one with the lowest validation CRMSE.
pub fn train_heading(
    train: &[TimeSequence],
    val: &[TimeSequence],
    cfg: &HeadingTrainConfig,
    preprocessor: Option<&dyn SequencePreprocessor>,
    base_seed: u64,
) -> Result<TrainedHeading> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (train, val) = match preprocessor {
        Some(p) => (p.apply(train, 0)?, p.apply(val, 1)?),
        None => (train.to_vec(), val.to_vec()),
    };
    let train_labels = labels(&train)?;
    let val_labels = labels(&val)?;
    let scaler = InputScaler::fit(&train)?;
    let refs: Vec<&TimeSequence> = train.iter().collect();
    let (train_x, time) = scaler.transform_batch(&refs)?;
    let val_refs: Vec<&TimeSequence> = val.iter().collect();
    let (val_x, val_time) = scaler.transform_batch(&val_refs)?;
    let per = time * CHANNELS;

    let mut net = HeadingNetwork::new(cfg.arch, seeds::derive(base_seed, Purpose::Init))?;
    let mut opt = Adam::new(net.param_count());
    let mut grads = vec![0.0; net.param_count()];
    let mut curve = TrainingCurve::new("crmse_deg");
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = net.params().to_vec();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch_x = Vec::with_capacity(cfg.batch_size * per);

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch)?;
        let mut shuffle_rng = seeds::rng_for(base_seed, Purpose::Shuffle, epoch as u64);
        let mut dropout_rng = seeds::rng_for(base_seed, Purpose::Dropout, epoch as u64);
        order.shuffle(&mut shuffle_rng);
        let mut sq_sum = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            batch_x.clear();
            for &i in idx {
                batch_x.extend_from_slice(&train_x[i * per..(i + 1) * per]);
            }
            let gts: Vec<f64> = idx.iter().map(|&i| train_labels[i]).collect();
            let (pred, cache) = net.forward(&batch_x, idx.len(), time, Some(&mut dropout_rng))?;
            let (loss, d_pred) = cyclic_mse_grad(&pred, &gts)?;
            grads.fill(0.0);
            net.backward(&cache, &d_pred, &mut grads);
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            opt.step(net.params_mut(), &grads, lr);
            sq_sum += loss * idx.len() as f64;
        }
        let train_crmse = (sq_sum / train.len() as f64).sqrt().to_degrees();
        let val_pred = net.infer(&val_x, val.len(), val_time)?;
        let val_crmse = crmse(&val_pred, &val_labels)?.to_degrees();
        if !val_crmse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        curve.push(EpochRecord {
            epoch,
            train: train_crmse,
            val: val_crmse,
            learning_rate: lr,
        });
        if stopper.observe(epoch, val_crmse) {
            best.copy_from_slice(net.params());
        }
        if stopper.should_stop(epoch) {
            break;
        }
    }
    net.params_mut().copy_from_slice(&best);
    Ok(TrainedHeading {
        model: HeadingModel { net, scaler },
        curve,
        best_epoch: stopper.best_epoch(),
    })
}
