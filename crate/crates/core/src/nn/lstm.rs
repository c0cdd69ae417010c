use std::ops::Range;

use rand::Rng;

use super::{gemm, sigmoid, tanh, ParamLayout};

/// One direction of an LSTM layer. Gate order in the stacked weights: input, forget,
/// cell candidate, output.
#[derive(Debug, Clone, PartialEq)]
struct LstmDirection {
    input: usize,
    hidden: usize,
    w_ih: Range<usize>,
    w_hh: Range<usize>,
    bias: Range<usize>,
    reverse: bool,
}

/// Per-direction activations kept for backpropagation.
#[derive(Debug, Clone, Default)]
struct DirectionCache {
    /// Post-activation gates `[time][batch][4H]`.
    gates: Vec<f64>,
    /// Cell state `[time][batch][H]`.
    cell: Vec<f64>,
    cell_tanh: Vec<f64>,
    /// Hidden output `[time][batch][H]`.
    out: Vec<f64>,
}

impl LstmDirection {
    fn new(layout: &mut ParamLayout, input: usize, hidden: usize, reverse: bool) -> Self {
        Self {
            input,
            hidden,
            w_ih: layout.alloc(4 * hidden * input),
            w_hh: layout.alloc(4 * hidden * hidden),
            bias: layout.alloc(4 * hidden),
            reverse,
        }
    }

    fn init<R: Rng>(&self, params: &mut [f64], rng: &mut R) {
        let bound = 1.0 / (self.hidden as f64).sqrt();
        for r in [self.w_ih.clone(), self.w_hh.clone(), self.bias.clone()] {
            for p in &mut params[r] {
                *p = rng.random_range(-bound..bound);
            }
        }
        let h = self.hidden;
        for p in &mut params[self.bias.start + h..self.bias.start + 2 * h] {
            *p += 1.0;
        }
    }

    fn steps(&self, time: usize) -> Box<dyn Iterator<Item = usize>> {
        if self.reverse {
            Box::new((0..time).rev())
        } else {
            Box::new(0..time)
        }
    }

    fn forward(&self, params: &[f64], x: &[f64], time: usize, batch: usize) -> DirectionCache {
        let h = self.hidden;
        let g4 = 4 * h;
        let w_ih = &params[self.w_ih.clone()];
        let w_hh = &params[self.w_hh.clone()];
        let bias = &params[self.bias.clone()];

        let mut gates = vec![0.0; time * batch * g4];
        for row in gates.chunks_exact_mut(g4) {
            row.copy_from_slice(bias);
        }
        gemm(time * batch, self.input, g4, 1.0, x, false, w_ih, true, 1.0, &mut gates);

        let mut cell = vec![0.0; time * batch * h];
        let mut cell_tanh = vec![0.0; time * batch * h];
        let mut out = vec![0.0; time * batch * h];
        let mut prev: Option<usize> = None;
        for t in self.steps(time) {
            let gate_t = &mut gates[t * batch * g4..(t + 1) * batch * g4];
            if let Some(p) = prev {
                gemm(
                    batch,
                    h,
                    g4,
                    1.0,
                    &out[p * batch * h..(p + 1) * batch * h],
                    false,
                    w_hh,
                    true,
                    1.0,
                    gate_t,
                );
            }
            for g in gate_t.chunks_exact_mut(g4) {
                let (ifg, rest) = g.split_at_mut(2 * h);
                let (cand, o) = rest.split_at_mut(h);
                ifg.iter_mut().chain(o.iter_mut()).for_each(|v| *v = sigmoid(*v));
                cand.iter_mut().for_each(|v| *v = tanh(*v));
            }
            let span = t * batch * h..(t + 1) * batch * h;
            for b in 0..batch {
                let g = &gate_t[b * g4..(b + 1) * g4];
                let base = (t * batch + b) * h;
                for j in 0..h {
                    let c_prev = prev.map_or(0.0, |p| cell[(p * batch + b) * h + j]);
                    cell[base + j] = g[h + j] * c_prev + g[j] * g[2 * h + j];
                }
            }
            for (tc, c) in cell_tanh[span.clone()].iter_mut().zip(&cell[span.clone()]) {
                *tc = tanh(*c);
            }
            for b in 0..batch {
                let g = &gate_t[b * g4 + 3 * h..(b + 1) * g4];
                let base = (t * batch + b) * h;
                for j in 0..h {
                    out[base + j] = g[j] * cell_tanh[base + j];
                }
            }
            prev = Some(t);
        }
        DirectionCache {
            gates,
            cell,
            cell_tanh,
            out,
        }
    }

    /// Returns `dL/dx`; accumulates parameter gradients.
    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        cache: &DirectionCache,
        d_out: &[f64],
        time: usize,
        batch: usize,
        grads: &mut [f64],
    ) -> Vec<f64> {
        let h = self.hidden;
        let g4 = 4 * h;
        let w_ih = &params[self.w_ih.clone()];
        let w_hh = &params[self.w_hh.clone()];

        let order: Vec<usize> = self.steps(time).collect();
        let mut d_pre = vec![0.0; time * batch * g4];
        let mut dh_next = vec![0.0; batch * h];
        let mut dc_next = vec![0.0; batch * h];
        for (pos, &t) in order.iter().enumerate().rev() {
            let prev = if pos > 0 { Some(order[pos - 1]) } else { None };
            let dp = &mut d_pre[t * batch * g4..(t + 1) * batch * g4];
            for b in 0..batch {
                let g = &cache.gates[(t * batch + b) * g4..(t * batch + b + 1) * g4];
                let base = (t * batch + b) * h;
                for j in 0..h {
                    let (i_g, f_g, c_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                    let tc = cache.cell_tanh[base + j];
                    let dh = d_out[base + j] + dh_next[b * h + j];
                    let c_prev = prev.map_or(0.0, |p| cache.cell[(p * batch + b) * h + j]);
                    let dc = dc_next[b * h + j] + dh * o_g * (1.0 - tc * tc);
                    dc_next[b * h + j] = dc * f_g;
                    let row = &mut dp[b * g4..(b + 1) * g4];
                    row[j] = dc * c_g * i_g * (1.0 - i_g);
                    row[h + j] = dc * c_prev * f_g * (1.0 - f_g);
                    row[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
                    row[3 * h + j] = dh * tc * o_g * (1.0 - o_g);
                }
            }
            match prev {
                Some(_) => gemm(batch, g4, h, 1.0, dp, false, w_hh, false, 0.0, &mut dh_next),
                None => dh_next.fill(0.0),
            }
        }
        // Step t's gates depend on the hidden state of the neighbouring step, which is
        // the previous block for the forward direction and the next for the backward one.
        if time > 1 {
            let span = (time - 1) * batch;
            let (d_rows, h_rows) = if self.reverse {
                (&d_pre[..span * g4], &cache.out[batch * h..])
            } else {
                (&d_pre[batch * g4..], &cache.out[..span * h])
            };
            gemm(
                g4,
                span,
                h,
                1.0,
                d_rows,
                true,
                h_rows,
                false,
                1.0,
                &mut grads[self.w_hh.clone()],
            );
        }
        gemm(
            g4,
            time * batch,
            self.input,
            1.0,
            &d_pre,
            true,
            x,
            false,
            1.0,
            &mut grads[self.w_ih.clone()],
        );
        let gb = &mut grads[self.bias.clone()];
        for row in d_pre.chunks_exact(g4) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = vec![0.0; time * batch * self.input];
        gemm(
            time * batch,
            g4,
            self.input,
            1.0,
            &d_pre,
            false,
            w_ih,
            false,
            0.0,
            &mut dx,
        );
        dx
    }
}

/// Bidirectional LSTM layer. Output features are `[forward H | backward H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    fwd: LstmDirection,
    bwd: LstmDirection,
}

#[derive(Debug, Clone, Default)]
pub struct BiLstmCache {
    fwd: DirectionCache,
    bwd: DirectionCache,
}

impl BiLstm {
    pub fn new(layout: &mut ParamLayout, input: usize, hidden: usize) -> Self {
        Self {
            fwd: LstmDirection::new(layout, input, hidden, false),
            bwd: LstmDirection::new(layout, input, hidden, true),
        }
    }

    pub fn input(&self) -> usize {
        self.fwd.input
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden
    }

    pub fn output(&self) -> usize {
        2 * self.fwd.hidden
    }

    pub fn init<R: Rng>(&self, params: &mut [f64], rng: &mut R) {
        self.fwd.init(params, rng);
        self.bwd.init(params, rng);
    }

    /// `x` is `[time][batch][input]`; returns `[time][batch][2H]` and the cache.
    pub fn forward(&self, params: &[f64], x: &[f64], time: usize, batch: usize) -> (Vec<f64>, BiLstmCache) {
        debug_assert_eq!(x.len(), time * batch * self.input());
        let fwd = self.fwd.forward(params, x, time, batch);
        let bwd = self.bwd.forward(params, x, time, batch);
        let h = self.hidden();
        let mut y = vec![0.0; time * batch * 2 * h];
        for (k, row) in y.chunks_exact_mut(2 * h).enumerate() {
            row[..h].copy_from_slice(&fwd.out[k * h..(k + 1) * h]);
            row[h..].copy_from_slice(&bwd.out[k * h..(k + 1) * h]);
        }
        (y, BiLstmCache { fwd, bwd })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        cache: &BiLstmCache,
        dy: &[f64],
        time: usize,
        batch: usize,
        grads: &mut [f64],
    ) -> Vec<f64> {
        let h = self.hidden();
        let rows = time * batch;
        let mut d_f = vec![0.0; rows * h];
        let mut d_b = vec![0.0; rows * h];
        for (k, row) in dy.chunks_exact(2 * h).enumerate() {
            d_f[k * h..(k + 1) * h].copy_from_slice(&row[..h]);
            d_b[k * h..(k + 1) * h].copy_from_slice(&row[h..]);
        }
        let mut dx = self.fwd.backward(params, x, &cache.fwd, &d_f, time, batch, grads);
        let dx_b = self.bwd.backward(params, x, &cache.bwd, &d_b, time, batch, grads);
        for (a, b) in dx.iter_mut().zip(dx_b) {
            *a += b;
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    /// Central finite differences on a scalar loss `sum(w * y)` over every parameter and
    /// input element of a small layer.
    #[test]
    fn gradients_match_finite_differences() {
        let (time, batch, input, hidden) = (4, 2, 3, 2);
        let mut layout = ParamLayout::new();
        let layer = BiLstm::new(&mut layout, input, hidden);
        let mut rng = seeds::rng(5);
        let mut params = vec![0.0; layout.len()];
        layer.init(&mut params, &mut rng);
        let x: Vec<f64> = (0..time * batch * input).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..time * batch * 2 * hidden)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let loss = |p: &[f64], x: &[f64]| -> f64 {
            let (y, _) = layer.forward(p, x, time, batch);
            y.iter().zip(&w).map(|(a, b)| a * b).sum()
        };

        let (_, cache) = layer.forward(&params, &x, time, batch);
        let mut grads = vec![0.0; params.len()];
        let dx = layer.backward(&params, &x, &cache, &w, time, batch, &mut grads);

        let eps = 1e-6;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += eps;
            let up = loss(&p, &x);
            p[i] -= 2.0 * eps;
            let down = loss(&p, &x);
            let fd = (up - down) / (2.0 * eps);
            assert!((fd - grads[i]).abs() < 1e-7, "param {i}: fd {fd} vs {}", grads[i]);
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += eps;
            let up = loss(&params, &xp);
            xp[i] -= 2.0 * eps;
            let down = loss(&params, &xp);
            let fd = (up - down) / (2.0 * eps);
            assert!((fd - dx[i]).abs() < 1e-7, "input {i}: fd {fd} vs {}", dx[i]);
        }
    }

    #[test]
    fn backward_direction_sees_the_future() {
        let mut layout = ParamLayout::new();
        let layer = BiLstm::new(&mut layout, 1, 2);
        let mut params = vec![0.0; layout.len()];
        layer.init(&mut params, &mut seeds::rng(1));
        let a = [0.0, 0.0, 0.0];
        let b = [0.0, 0.0, 1.0];
        let (ya, _) = layer.forward(&params, &a, 3, 1);
        let (yb, _) = layer.forward(&params, &b, 3, 1);
        // first step: forward half unchanged, backward half changed
        assert_eq!(ya[..2], yb[..2]);
        assert_ne!(ya[2..4], yb[2..4]);
    }
}
