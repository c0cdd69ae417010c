use std::ops::Range;

use rand::Rng;

use super::{gemm, ParamLayout};

/// Affine map applied row-wise: `y = x Wᵀ + b`, `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub input: usize,
    pub output: usize,
    weight: Range<usize>,
    bias: Range<usize>,
}

impl Linear {
    pub fn new(layout: &mut ParamLayout, input: usize, output: usize) -> Self {
        Self {
            input,
            output,
            weight: layout.alloc(input * output),
            bias: layout.alloc(output),
        }
    }

    pub fn init<R: Rng>(&self, params: &mut [f64], rng: &mut R) {
        let bound = 1.0 / (self.input as f64).sqrt();
        for p in &mut params[self.weight.clone()] {
            *p = rng.random_range(-bound..bound);
        }
        for p in &mut params[self.bias.clone()] {
            *p = rng.random_range(-bound..bound);
        }
    }

    pub fn weight<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.weight.clone()]
    }

    pub fn bias<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.bias.clone()]
    }

    /// `x` holds `rows x input` values.
    pub fn forward(&self, params: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
        let mut y = vec![0.0; rows * self.output];
        for row in y.chunks_exact_mut(self.output) {
            row.copy_from_slice(self.bias(params));
        }
        gemm(
            rows,
            self.input,
            self.output,
            1.0,
            x,
            false,
            self.weight(params),
            true,
            1.0,
            &mut y,
        );
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, params: &[f64], x: &[f64], dy: &[f64], rows: usize, grads: &mut [f64]) -> Vec<f64> {
        gemm(
            self.output,
            rows,
            self.input,
            1.0,
            dy,
            true,
            x,
            false,
            1.0,
            &mut grads[self.weight.clone()],
        );
        let gb = &mut grads[self.bias.clone()];
        for row in dy.chunks_exact(self.output) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = vec![0.0; rows * self.input];
        gemm(
            rows,
            self.output,
            self.input,
            1.0,
            dy,
            false,
            self.weight(params),
            false,
            0.0,
            &mut dx,
        );
        dx
    }
}
