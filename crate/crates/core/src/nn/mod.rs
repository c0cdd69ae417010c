//! Minimal dense building blocks with hand-written backpropagation.
//!
//! Networks keep every parameter in one flat `Vec<f64>`; layers hold index ranges
//! into it. Gradients are a same-length vector, which keeps the optimizer and the
//! checkpoint format trivial. Activations are laid out time-major: `[time][batch][feature]`.

mod adam;
mod dropout;
mod gemm;
mod linear;
mod lstm;
mod params;

pub use adam::Adam;
pub use dropout::Dropout;
pub use gemm::gemm;
pub use linear::Linear;
pub use lstm::{BiLstm, BiLstmCache};
pub use params::ParamLayout;

/// Branch-free `exp` that the compiler can vectorize: `2^n · p(r)` with a degree-13
/// Taylor polynomial on `|r| <= ln 2 / 2`. Relative error below 1e-15; inputs are
/// clamped to the normal range.
#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    const MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let x = x.clamp(-708.0, 709.0);
    let t = x * std::f64::consts::LOG2_E + MAGIC;
    let n = t - MAGIC;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    let mut p = INV_FACT[13];
    for c in INV_FACT[..13].iter().rev() {
        p = p * r + c;
    }
    let bits = (t.to_bits().wrapping_sub(MAGIC.to_bits()).wrapping_add(1023)) << 52;
    p * f64::from_bits(bits)
}

const INV_FACT: [f64; 14] = [
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
    1.0 / 479001600.0,
    1.0 / 6227020800.0,
];

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}

#[inline]
pub(crate) fn tanh(x: f64) -> f64 {
    1.0 - 2.0 / (exp(2.0 * x) + 1.0)
}

/// Reorders `[batch][time][feature]` into `[time][batch][feature]`.
pub fn batch_major_to_time_major(x: &[f64], batch: usize, time: usize, feat: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for b in 0..batch {
        for t in 0..time {
            let src = (b * time + t) * feat;
            let dst = (t * batch + b) * feat;
            out[dst..dst + feat].copy_from_slice(&x[src..src + feat]);
        }
    }
    out
}

/// Inverse of [`batch_major_to_time_major`].
pub fn time_major_to_batch_major(x: &[f64], batch: usize, time: usize, feat: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for t in 0..time {
        for b in 0..batch {
            let src = (t * batch + b) * feat;
            let dst = (b * time + t) * feat;
            out[dst..dst + feat].copy_from_slice(&x[src..src + feat]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_matches_std() {
        let mut x = -700.0;
        while x < 700.0 {
            let (a, b) = (exp(x), x.exp());
            assert!(((a - b) / b).abs() < 2e-15, "{x}: {a} vs {b}");
            x += 0.37;
        }
        for x in [-1e-12, 0.0, 1e-12, 0.5, -0.5, 0.3465, -0.3466] {
            assert!(((exp(x) - x.exp()) / x.exp()).abs() < 2e-16 * 4.0);
        }
        assert_eq!(exp(-1e6), (-708f64).exp().max(exp(-708.0)));
        assert!(sigmoid(-1e6) < 1e-300 && sigmoid(1e6) == 1.0);
        assert_eq!(tanh(1e6), 1.0);
        assert_eq!(tanh(-1e6), -1.0);
        for x in [-3.0f64, -0.1, 0.0, 0.1, 2.0] {
            assert!((tanh(x) - x.tanh()).abs() < 1e-15);
        }
    }
}
