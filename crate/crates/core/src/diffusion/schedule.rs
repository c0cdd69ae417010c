use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear variance schedule with derived `α_t = 1 - β_t` and `ᾱ_t = ∏_{s≤t} α_s`.
///
/// Steps are 1-based everywhere in the public API.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    steps: usize,
    beta_min: f64,
    beta_max: f64,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            steps: 1000,
            beta_min: 1e-4,
            beta_max: 5e-4,
        }
    }
}

impl ScheduleParams {
    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.steps, self.beta_min, self.beta_max)
    }
}

impl NoiseSchedule {
    /// `β_t = β_min + t (β_max - β_min) / T` for `t = 1..=T`.
    pub fn linear(steps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::config("schedule.steps", "must be at least 1"));
        }
        if !(0.0 < beta_min && beta_min < beta_max && beta_max < 1.0) {
            return Err(Error::config(
                "schedule.beta_min/beta_max",
                format!("need 0 < beta_min < beta_max < 1, got {beta_min}, {beta_max}"),
            ));
        }
        let beta: Vec<f64> = (1..=steps)
            .map(|t| beta_min + t as f64 * (beta_max - beta_min) / steps as f64)
            .collect();
        Ok(Self::from_betas(steps, beta_min, beta_max, beta))
    }

    fn from_betas(steps: usize, beta_min: f64, beta_max: f64, beta: Vec<f64>) -> Self {
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for a in &alpha {
            acc *= a;
            alpha_bar.push(acc);
        }
        Self {
            steps,
            beta_min,
            beta_max,
            beta,
            alpha,
            alpha_bar,
        }
    }

    /// Arbitrary per-step betas; used for degenerate schedules in tests and demos.
    pub fn from_raw_betas(beta: Vec<f64>) -> Self {
        let steps = beta.len();
        let lo = beta.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = beta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::from_betas(steps, lo, hi, beta)
    }

    pub fn params(&self) -> ScheduleParams {
        ScheduleParams {
            steps: self.steps,
            beta_min: self.beta_min,
            beta_max: self.beta_max,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps {
            return Err(Error::config("t", format!("step {t} outside 1..={}", self.steps)));
        }
        Ok(())
    }
}

/// Closed-form marginal sample `x_t = √ᾱ_t x0 + √(1-ᾱ_t) ε`.
pub fn forward_noise(x0: &[f64], t: usize, eps: &[f64], sched: &NoiseSchedule) -> Result<Vec<f64>> {
    sched.check_step(t)?;
    if x0.len() != eps.len() {
        return Err(Error::shape(format!(
            "x0 has {} elements, noise has {}",
            x0.len(),
            eps.len()
        )));
    }
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}

/// Applies the one-step kernel `N(√(1-β_s) x, β_s I)` for `s = 1..=t`. Only used as an
/// independent reference for the closed-form marginal.
pub fn forward_noise_markov<R: Rng>(x0: &[f64], t: usize, rng: &mut R, sched: &NoiseSchedule) -> Vec<f64> {
    let mut x = x0.to_vec();
    for s in 1..=t {
        let beta = sched.beta(s);
        let (keep, spread) = ((1.0 - beta).sqrt(), beta.sqrt());
        for v in x.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = keep * *v + spread * z;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn toy_schedule_values() {
        let s = NoiseSchedule::linear(2, 0.1, 0.3).unwrap();
        assert_relative_eq!(s.beta(1), 0.2, epsilon = 1e-15);
        assert_relative_eq!(s.beta(2), 0.3, epsilon = 1e-15);
        assert_relative_eq!(s.alpha(1), 0.8, epsilon = 1e-15);
        assert_relative_eq!(s.alpha(2), 0.7, epsilon = 1e-15);
        assert_relative_eq!(s.alpha_bar(1), 0.8, epsilon = 1e-15);
        assert_relative_eq!(s.alpha_bar(2), 0.56, epsilon = 1e-15);
    }

    #[test]
    fn defaults_endpoint_and_products() {
        let s = ScheduleParams::default().build().unwrap();
        assert_eq!(s.beta(1000), 5e-4);
        // independent evaluation order: sum of logs
        let direct = (1..=1000)
            .map(|t| (1.0 - (1e-4 + t as f64 * 4e-4 / 1000.0)).ln())
            .sum::<f64>()
            .exp();
        assert_relative_eq!(s.alpha_bar(1000), direct, max_relative = 1e-12);
        for t in 2..=1000 {
            assert!(s.beta(t) > s.beta(t - 1));
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            assert!(s.alpha_bar(t) > 0.0 && s.alpha_bar(t) < 1.0);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(NoiseSchedule::linear(0, 0.1, 0.2).is_err());
        assert!(NoiseSchedule::linear(10, 0.2, 0.1).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 0.1).is_err());
        assert!(NoiseSchedule::linear(10, 0.1, 1.0).is_err());
    }

    #[test]
    fn forward_noise_special_cases() {
        let s = NoiseSchedule::linear(10, 0.01, 0.2).unwrap();
        let x0 = [1.0, -2.0, 0.5];
        let zero = [0.0; 3];
        let eps = [0.3, 0.1, -1.0];
        let a = forward_noise(&x0, 4, &zero, &s).unwrap();
        for (v, x) in a.iter().zip(x0) {
            assert_relative_eq!(*v, s.alpha_bar(4).sqrt() * x, epsilon = 1e-15);
        }
        let b = forward_noise(&zero, 4, &eps, &s).unwrap();
        for (v, e) in b.iter().zip(eps) {
            assert_relative_eq!(*v, (1.0 - s.alpha_bar(4)).sqrt() * e, epsilon = 1e-15);
        }
        assert!(matches!(forward_noise(&x0, 4, &eps[..2], &s), Err(Error::Shape(_))));
        assert!(forward_noise(&x0, 0, &eps, &s).is_err());
        assert!(forward_noise(&x0, 11, &eps, &s).is_err());
    }

    #[test]
    fn markov_chain_with_vanishing_betas_is_identity() {
        let s = NoiseSchedule::from_raw_betas(vec![0.0; 20]);
        let x0 = vec![0.25, -1.5];
        let mut rng = crate::seeds::rng(3);
        assert_eq!(forward_noise_markov(&x0, 20, &mut rng, &s), x0);
    }
}
