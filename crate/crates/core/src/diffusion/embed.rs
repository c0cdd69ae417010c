/// Sinusoidal encoding of a diffusion step: `dim / 2` frequency pairs
/// `(sin(t ω_k), cos(t ω_k))` with `ω_k = 10000^(-2k/dim)`.
pub fn embed_tstep(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for k in 0..half {
        let freq = 10000f64.powf(-(2.0 * k as f64) / dim as f64);
        let (s, c) = (t as f64 * freq).sin_cos();
        out[2 * k] = s;
        out[2 * k + 1] = c;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_bounded_and_distinct() {
        assert_eq!(embed_tstep(17, 20), embed_tstep(17, 20));
        let all: Vec<Vec<f64>> = (1..=1000).map(|t| embed_tstep(t, 20)).collect();
        assert!(all.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(dist(&all[0], &all[999]) > 0.0);
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert!(dist(&all[i], &all[j]) > 1e-6, "{} vs {}", i + 1, j + 1);
            }
        }
    }
}
