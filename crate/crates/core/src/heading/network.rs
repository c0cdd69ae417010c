use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::wrap_two_pi;
use crate::nn::{self, BiLstm, BiLstmCache, Dropout, Linear, ParamLayout};
use crate::seeds::{self, Rng};
use crate::synth::CHANNELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Constant learning rate, no dropout, batch size 100.
    Baseline,
    /// Exponential learning-rate decay, dropout, batch size 32.
    Enhanced,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Enhanced => "enhanced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadingArch {
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for HeadingArch {
    fn default() -> Self {
        Self::for_variant(Variant::Enhanced)
    }
}

impl HeadingArch {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            layers: 2,
            hidden: 24,
            dropout: match variant {
                Variant::Baseline => 0.0,
                Variant::Enhanced => 0.05,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 {
            return Err(Error::config("heading.arch", "layers and hidden must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("heading.arch.dropout", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Bidirectional LSTM regressor. The sequence summary is the concatenation of the
/// forward direction's last state and the backward direction's first state; a linear
/// head maps it to `(sin ψ, cos ψ)` and the heading is their `atan2`, wrapped to
/// `[0, 2π)`. Dropout sits between recurrent layers and before the head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadingNetwork {
    arch: HeadingArch,
    layers: Vec<BiLstm>,
    head: Linear,
    params: Vec<f64>,
}

pub struct HeadingCache {
    time: usize,
    batch: usize,
    inputs: Vec<Vec<f64>>,
    lstm: Vec<BiLstmCache>,
    masks: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    pooled_mask: Vec<f64>,
    sin_cos: Vec<f64>,
}

impl HeadingNetwork {
    fn skeleton(arch: HeadingArch) -> (Self, usize) {
        let mut layout = ParamLayout::new();
        let mut width = CHANNELS;
        let layers: Vec<BiLstm> = (0..arch.layers)
            .map(|_| {
                let l = BiLstm::new(&mut layout, width, arch.hidden);
                width = l.output();
                l
            })
            .collect();
        let head = Linear::new(&mut layout, width, 2);
        let n = layout.len();
        (
            Self {
                arch,
                layers,
                head,
                params: Vec::new(),
            },
            n,
        )
    }

    pub fn new(arch: HeadingArch, init_seed: u64) -> Result<Self> {
        arch.validate()?;
        let (mut net, n) = Self::skeleton(arch);
        let mut params = vec![0.0; n];
        let mut rng = seeds::rng(init_seed);
        for l in &net.layers {
            l.init(&mut params, &mut rng);
        }
        net.head.init(&mut params, &mut rng);
        net.params = params;
        Ok(net)
    }

    pub fn from_params(arch: HeadingArch, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let (mut net, n) = Self::skeleton(arch);
        if params.len() != n {
            return Err(Error::shape(format!(
                "heading architecture needs {n} parameters, got {}",
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn arch(&self) -> HeadingArch {
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

    /// `x` is batch-major `[batch][time][3]`. Dropout is active only when a generator is
    /// supplied. Returns headings in `[0, 2π)`.
    pub fn forward(
        &self,
        x: &[f64],
        batch: usize,
        time: usize,
        mut dropout_rng: Option<&mut Rng>,
    ) -> Result<(Vec<f64>, HeadingCache)> {
        if batch == 0 {
            return Err(Error::EmptyBatch);
        }
        if time == 0 || x.len() != batch * time * CHANNELS {
            return Err(Error::shape(format!(
                "expected {batch} x {time} x {CHANNELS} inputs, got {}",
                x.len()
            )));
        }
        let p = &self.params;
        let drop = Dropout::new(self.arch.dropout);
        let mut h = nn::batch_major_to_time_major(x, batch, time, CHANNELS);
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            if k > 0 {
                masks.push(match dropout_rng.as_deref_mut() {
                    Some(rng) => drop.apply(&mut h, rng),
                    None => Vec::new(),
                });
            }
            let (y, cache) = layer.forward(p, &h, time, batch);
            inputs.push(std::mem::replace(&mut h, y));
            caches.push(cache);
        }
        let hid = self.arch.hidden;
        let width = 2 * hid;
        let mut pooled = vec![0.0; batch * width];
        for b in 0..batch {
            let last = ((time - 1) * batch + b) * width;
            let first = b * width;
            pooled[b * width..b * width + hid].copy_from_slice(&h[last..last + hid]);
            pooled[b * width + hid..(b + 1) * width].copy_from_slice(&h[first + hid..first + width]);
        }
        let pooled_mask = match dropout_rng {
            Some(rng) => drop.apply(&mut pooled, rng),
            None => Vec::new(),
        };
        let sin_cos = self.head.forward(p, &pooled, batch);
        let headings = sin_cos
            .chunks_exact(2)
            .map(|sc| wrap_two_pi(sc[0].atan2(sc[1])))
            .collect();
        Ok((
            headings,
            HeadingCache {
                time,
                batch,
                inputs,
                lstm: caches,
                masks,
                pooled,
                pooled_mask,
                sin_cos,
            },
        ))
    }

    /// Backpropagates `dL/dψ` per batch element.
    pub fn backward(&self, cache: &HeadingCache, d_heading: &[f64], grads: &mut [f64]) {
        let (time, batch) = (cache.time, cache.batch);
        let p = &self.params;
        let mut d_sc = vec![0.0; batch * 2];
        for b in 0..batch {
            let (s, c) = (cache.sin_cos[2 * b], cache.sin_cos[2 * b + 1]);
            let r2 = (s * s + c * c).max(1e-300);
            d_sc[2 * b] = d_heading[b] * c / r2;
            d_sc[2 * b + 1] = -d_heading[b] * s / r2;
        }
        let mut d_pooled = self.head.backward(p, &cache.pooled, &d_sc, batch, grads);
        Dropout::backward(&cache.pooled_mask, &mut d_pooled);

        let hid = self.arch.hidden;
        let width = 2 * hid;
        let mut dh = vec![0.0; time * batch * width];
        for b in 0..batch {
            let last = ((time - 1) * batch + b) * width;
            let first = b * width;
            dh[last..last + hid].copy_from_slice(&d_pooled[b * width..b * width + hid]);
            dh[first + hid..first + width].copy_from_slice(&d_pooled[b * width + hid..(b + 1) * width]);
        }
        for k in (0..self.layers.len()).rev() {
            dh = self.layers[k].backward(p, &cache.inputs[k], &cache.lstm[k], &dh, time, batch, grads);
            if k > 0 {
                Dropout::backward(&cache.masks[k - 1], &mut dh);
            }
        }
    }

    pub fn infer(&self, x: &[f64], batch: usize, time: usize) -> Result<Vec<f64>> {
        Ok(self.forward(x, batch, time, None)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn inference_is_deterministic_and_wrapped() {
        let net = HeadingNetwork::new(HeadingArch::for_variant(Variant::Enhanced), 3).unwrap();
        let mut rng = seeds::rng(1);
        let x: Vec<f64> = (0..50 * 20 * 3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a = net.infer(&x, 50, 20).unwrap();
        let b = net.infer(&x, 50, 20).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|h| (0.0..std::f64::consts::TAU).contains(h)));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let arch = HeadingArch {
            layers: 2,
            hidden: 3,
            dropout: 0.0,
        };
        let net = HeadingNetwork::new(arch, 5).unwrap();
        let mut rng = seeds::rng(2);
        let (batch, time) = (2, 4);
        let x: Vec<f64> = (0..batch * time * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = [0.7, -1.3];
        // smooth objective: sum of w_b * sin(ψ_b) avoids the wrap discontinuity
        let objective = |n: &HeadingNetwork| -> f64 {
            n.infer(&x, batch, time)
                .unwrap()
                .iter()
                .zip(&w)
                .map(|(h, w)| w * h.sin())
                .sum()
        };
        let (psi, cache) = net.forward(&x, batch, time, None).unwrap();
        let d: Vec<f64> = psi.iter().zip(&w).map(|(h, w)| w * h.cos()).collect();
        let mut grads = vec![0.0; net.param_count()];
        net.backward(&cache, &d, &mut grads);
        let h = 1e-6;
        for (i, g) in grads.iter().enumerate() {
            let mut n2 = net.clone();
            n2.params_mut()[i] += h;
            let up = objective(&n2);
            n2.params_mut()[i] -= 2.0 * h;
            let down = objective(&n2);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g).abs() < 1e-6, "param {i}: {fd} vs {g}");
        }
    }

    #[test]
    fn dropout_only_in_training() {
        let net = HeadingNetwork::new(
            HeadingArch {
                layers: 2,
                hidden: 8,
                dropout: 0.5,
            },
            1,
        )
        .unwrap();
        let x: Vec<f64> = (0..2 * 10 * 3).map(|i| (i as f64).sin()).collect();
        let clean = net.infer(&x, 2, 10).unwrap();
        let mut rng = seeds::rng(9);
        let (noisy, _) = net.forward(&x, 2, 10, Some(&mut rng)).unwrap();
        assert_ne!(clean, noisy);
        assert_eq!(clean, net.infer(&x, 2, 10).unwrap());
    }
}
