use rand_distr::{Distribution, StandardNormal};

use super::denoiser::DenoiserNetwork;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::seeds::Rng;
use crate::synth::CHANNELS;

fn check_t_back(t_back: usize, sched: &NoiseSchedule) -> Result<()> {
    if t_back > sched.steps() {
        return Err(Error::config(
            "pipeline.t_back",
            format!("{t_back} outside 0..={}", sched.steps()),
        ));
    }
    Ok(())
}

/// Runs the reverse chain from `t = T` down to `t_back + 1` on a batch of flattened
/// sequences laid out back to back, treating the input as `x_T`:
///
/// `x_{t-1} = (x_t - β_t / √(1-ᾱ_t) · ε̂) / √α_t + √β_t z`
///
/// `z` is omitted on the last iteration and entirely when `rngs` is `None`. Each batch
/// element draws from its own generator, so results do not depend on batch composition.
/// `predict(x, t)` returns the noise estimate for the whole batch.
pub fn reverse_process<F>(
    x: &[f64],
    batch: usize,
    t_back: usize,
    sched: &NoiseSchedule,
    mut rngs: Option<&mut [Rng]>,
    mut predict: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], usize) -> Result<Vec<f64>>,
{
    check_t_back(t_back, sched)?;
    if batch == 0 || !x.len().is_multiple_of(batch) {
        return Err(Error::shape("batch does not divide the input"));
    }
    if let Some(r) = rngs.as_deref() {
        if r.len() != batch {
            return Err(Error::shape("one generator per batch element is required"));
        }
    }
    let per = x.len() / batch;
    let mut x = x.to_vec();
    for t in (t_back + 1..=sched.steps()).rev() {
        let eps_hat = predict(&x, t)?;
        if eps_hat.len() != x.len() {
            return Err(Error::shape("noise prediction does not match input shape"));
        }
        let coef = sched.beta(t) / (1.0 - sched.alpha_bar(t)).sqrt();
        let inv_sqrt_alpha = 1.0 / sched.alpha(t).sqrt();
        for (v, e) in x.iter_mut().zip(&eps_hat) {
            *v = (*v - coef * e) * inv_sqrt_alpha;
        }
        if t > t_back + 1 {
            if let Some(rngs) = rngs.as_deref_mut() {
                let sigma = sched.beta(t).sqrt();
                for (chunk, rng) in x.chunks_exact_mut(per).zip(rngs.iter_mut()) {
                    for v in chunk {
                        let z: f64 = StandardNormal.sample(rng);
                        *v += sigma * z;
                    }
                }
            }
        }
    }
    Ok(x)
}

/// Denoises one normalized sequence (flattened `[time x 3]`) with `T - t_back` reverse
/// steps.
pub fn denoise(
    net: &DenoiserNetwork,
    x_noisy: &[f64],
    t_back: usize,
    sched: &NoiseSchedule,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if !x_noisy.len().is_multiple_of(CHANNELS) {
        return Err(Error::shape("input is not whole rows of 3 channels"));
    }
    let time = x_noisy.len() / CHANNELS;
    reverse_process(x_noisy, 1, t_back, sched, Some(std::slice::from_mut(rng)), |x, t| {
        net.predict(x, &[t], time)
    })
}

/// Batched form of [`denoise`]; `rngs[i]` drives sequence `i`.
pub fn denoise_batch(
    net: &DenoiserNetwork,
    xs: &[f64],
    time: usize,
    t_back: usize,
    sched: &NoiseSchedule,
    rngs: &mut [Rng],
) -> Result<Vec<f64>> {
    let batch = rngs.len();
    if xs.len() != batch * time * CHANNELS {
        return Err(Error::shape("batch input does not match generator count"));
    }
    let steps_for = |t: usize| vec![t; batch];
    reverse_process(xs, batch, t_back, sched, Some(rngs), |x, t| {
        net.predict(x, &steps_for(t), time)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::forward_noise;
    use crate::seeds;
    use rand::Rng as _;

    #[test]
    fn zero_iterations_returns_input() {
        let s = NoiseSchedule::linear(10, 0.01, 0.1).unwrap();
        let x = vec![0.5, -0.25, 3.0];
        let mut calls = 0;
        let out = reverse_process(&x, 1, 10, &s, None, |x, _| {
            calls += 1;
            Ok(x.to_vec())
        })
        .unwrap();
        assert_eq!(out, x);
        assert_eq!(calls, 0);
        assert!(reverse_process(&x, 1, 11, &s, None, |x, _| Ok(x.to_vec())).is_err());
    }

    #[test]
    fn iteration_count() {
        let s = NoiseSchedule::linear(1000, 1e-4, 5e-4).unwrap();
        let mut seen = Vec::new();
        reverse_process(&[1.0], 1, 950, &s, None, |x, t| {
            seen.push(t);
            Ok(vec![0.0; x.len()])
        })
        .unwrap();
        assert_eq!(seen.len(), 50);
        assert_eq!((seen[0], seen[49]), (1000, 951));
    }

    #[test]
    fn oracle_single_step_inverts_forward() {
        let s = NoiseSchedule::linear(1, 0.01, 0.3).unwrap();
        let mut rng = seeds::rng(2);
        let x0: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
        let eps: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x1 = forward_noise(&x0, 1, &eps, &s).unwrap();
        let out = reverse_process(&x1, 1, 0, &s, None, |_, _| Ok(eps.clone())).unwrap();
        for (a, b) in out.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
