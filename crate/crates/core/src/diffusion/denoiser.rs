use serde::{Deserialize, Serialize};

use super::embed::embed_tstep;
use crate::error::{Error, Result};
use crate::nn::{self, BiLstm, BiLstmCache, Linear, ParamLayout};
use crate::seeds;
use crate::synth::CHANNELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserArch {
    pub layers: usize,
    pub hidden: usize,
    pub embed_dim: usize,
}

impl Default for DenoiserArch {
    fn default() -> Self {
        Self {
            layers: 5,
            hidden: 64,
            embed_dim: 20,
        }
    }
}

impl DenoiserArch {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 {
            return Err(Error::config("denoiser.arch", "layers and hidden must be positive"));
        }
        if self.embed_dim == 0 || !self.embed_dim.is_multiple_of(2) {
            return Err(Error::config(
                "denoiser.arch.embed_dim",
                "must be a positive even number",
            ));
        }
        Ok(())
    }
}

/// Step-conditioned noise predictor `ε_θ(x_t, t)`: stacked bidirectional LSTMs with a
/// learned projection of the step embedding added to every layer's input at every time
/// step, followed by a per-step linear read-out to the three gyro channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserNetwork {
    arch: DenoiserArch,
    layers: Vec<BiLstm>,
    conditioners: Vec<Linear>,
    head: Linear,
    params: Vec<f64>,
}

pub struct DenoiserCache {
    time: usize,
    batch: usize,
    embeds: Vec<f64>,
    fused: Vec<Vec<f64>>,
    lstm: Vec<BiLstmCache>,
    last: Vec<f64>,
}

impl DenoiserNetwork {
    fn skeleton(arch: DenoiserArch) -> (Self, usize) {
        let mut layout = ParamLayout::new();
        let mut layers = Vec::with_capacity(arch.layers);
        let mut conditioners = Vec::with_capacity(arch.layers);
        let mut width = CHANNELS;
        for _ in 0..arch.layers {
            conditioners.push(Linear::new(&mut layout, arch.embed_dim, width));
            let layer = BiLstm::new(&mut layout, width, arch.hidden);
            width = layer.output();
            layers.push(layer);
        }
        let head = Linear::new(&mut layout, width, CHANNELS);
        let n = layout.len();
        (
            Self {
                arch,
                layers,
                conditioners,
                head,
                params: Vec::new(),
            },
            n,
        )
    }

    pub fn new(arch: DenoiserArch, init_seed: u64) -> Result<Self> {
        arch.validate()?;
        let (mut net, n) = Self::skeleton(arch);
        let mut params = vec![0.0; n];
        let mut rng = seeds::rng(init_seed);
        for (cond, layer) in net.conditioners.iter().zip(&net.layers) {
            cond.init(&mut params, &mut rng);
            layer.init(&mut params, &mut rng);
        }
        net.head.init(&mut params, &mut rng);
        net.params = params;
        Ok(net)
    }

    pub fn from_params(arch: DenoiserArch, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let (mut net, n) = Self::skeleton(arch);
        if params.len() != n {
            return Err(Error::shape(format!(
                "denoiser architecture needs {n} parameters, got {}",
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn arch(&self) -> DenoiserArch {
        self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// `x` is batch-major `[batch][time][3]`; one diffusion step per batch element.
    pub fn forward(&self, x: &[f64], steps: &[usize], time: usize) -> Result<(Vec<f64>, DenoiserCache)> {
        let batch = steps.len();
        if batch == 0 {
            return Err(Error::EmptyBatch);
        }
        if x.len() != batch * time * CHANNELS || time == 0 {
            return Err(Error::shape(format!(
                "expected {batch} x {time} x {CHANNELS} inputs, got {}",
                x.len()
            )));
        }
        let dim = self.arch.embed_dim;
        let embeds: Vec<f64> = steps.iter().flat_map(|&t| embed_tstep(t, dim)).collect();
        let p = &self.params;

        let mut h = nn::batch_major_to_time_major(x, batch, time, CHANNELS);
        let mut fused_all = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        for (layer, cond) in self.layers.iter().zip(&self.conditioners) {
            let width = layer.input();
            let shift = cond.forward(p, &embeds, batch);
            for (k, row) in h.chunks_exact_mut(width).enumerate() {
                let b = k % batch;
                for (v, s) in row.iter_mut().zip(&shift[b * width..(b + 1) * width]) {
                    *v += s;
                }
            }
            let (y, cache) = layer.forward(p, &h, time, batch);
            fused_all.push(std::mem::replace(&mut h, y));
            caches.push(cache);
        }
        let out = self.head.forward(p, &h, time * batch);
        let out = nn::time_major_to_batch_major(&out, batch, time, CHANNELS);
        Ok((
            out,
            DenoiserCache {
                time,
                batch,
                embeds,
                fused: fused_all,
                lstm: caches,
                last: h,
            },
        ))
    }

    /// Accumulates `dL/dθ` into `grads` for a batch-major output gradient.
    pub fn backward(&self, cache: &DenoiserCache, d_out: &[f64], grads: &mut [f64]) {
        let (time, batch) = (cache.time, cache.batch);
        let p = &self.params;
        let d_out = nn::batch_major_to_time_major(d_out, batch, time, CHANNELS);
        let mut dh = self.head.backward(p, &cache.last, &d_out, time * batch, grads);
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let width = layer.input();
            let d_fused = layer.backward(p, &cache.fused[l], &cache.lstm[l], &dh, time, batch, grads);
            let mut d_shift = vec![0.0; batch * width];
            for (k, row) in d_fused.chunks_exact(width).enumerate() {
                let b = k % batch;
                for (acc, d) in d_shift[b * width..(b + 1) * width].iter_mut().zip(row) {
                    *acc += d;
                }
            }
            self.conditioners[l].backward(p, &cache.embeds, &d_shift, batch, grads);
            dh = d_fused;
        }
    }

    /// Noise prediction for a batch of flattened `[time x 3]` sequences.
    pub fn predict(&self, x: &[f64], steps: &[usize], time: usize) -> Result<Vec<f64>> {
        Ok(self.forward(x, steps, time)?.0)
    }
}

/// `ε̂ = ε_θ(x_t, t)` for a single `[time x 3]` sequence given flattened.
pub fn predict_noise(net: &DenoiserNetwork, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
    if !x_t.len().is_multiple_of(CHANNELS) {
        return Err(Error::shape(format!("{} values are not whole rows of 3", x_t.len())));
    }
    net.predict(x_t, &[t], x_t.len() / CHANNELS)
}
