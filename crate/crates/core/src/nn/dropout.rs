use rand::Rng;

/// Inverted dropout. A rate of zero is a no-op and draws nothing from the generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate));
        Self { rate }
    }

    /// Applies a fresh mask in place and returns it (empty when inactive).
    pub fn apply<R: Rng>(&self, x: &mut [f64], rng: &mut R) -> Vec<f64> {
        if self.rate == 0.0 {
            return Vec::new();
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
            .collect();
        for (v, m) in x.iter_mut().zip(&mask) {
            *v *= m;
        }
        mask
    }

    pub fn backward(mask: &[f64], grad: &mut [f64]) {
        if mask.is_empty() {
            return;
        }
        for (g, m) in grad.iter_mut().zip(mask) {
            *g *= m;
        }
    }
}
