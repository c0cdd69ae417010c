//! Spectrally filtered MSE: singular values of each `[n_time x channels]` matrix at or
//! below `τ · S_max` are dropped before the element-wise comparison.
//!
//! With `M = U S Vᵀ` the filtered matrix is `M P_K`, where `P_K` projects onto the right
//! singular vectors that survive the threshold. Singular pairs come from the symmetric
//! eigen-decomposition of `MᵀM` (`S_i = √λ_i`), which also provides the complementary
//! eigenvectors needed for the gradient of `P_K`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

struct Spectrum {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    kept: Vec<bool>,
}

fn spectrum(m: &DMatrix<f64>, tau: f64) -> Spectrum {
    let gram = m.transpose() * m;
    let eig = SymmetricEigen::new(gram);
    let values: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let s_max = values.iter().copied().fold(0.0, f64::max).sqrt();
    let kept = values.iter().map(|l| l.sqrt() > tau * s_max).collect();
    Spectrum {
        values,
        vectors: eig.eigenvectors,
        kept,
    }
}

fn projector(spec: &Spectrum) -> DMatrix<f64> {
    let c = spec.vectors.nrows();
    let mut p = DMatrix::zeros(c, c);
    for (i, keep) in spec.kept.iter().enumerate() {
        if *keep {
            let v = spec.vectors.column(i);
            p += v * v.transpose();
        }
    }
    p
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::config(
            "svd_threshold",
            format!("τ must lie in [0, 1), got {tau}"),
        ));
    }
    Ok(())
}

fn to_matrix(values: &[f64], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if values.len() != rows * cols {
        return Err(Error::shape(format!(
            "{} values do not form a {rows} x {cols} matrix",
            values.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, values))
}

fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Filters a row-major `rows x cols` matrix.
pub fn svd_filter(values: &[f64], rows: usize, cols: usize, tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    let m = to_matrix(values, rows, cols)?;
    let spec = spectrum(&m, tau);
    Ok(to_row_major(&(&m * projector(&spec))))
}

/// Loss of a batch of row-major `[n_time x channels]` matrices laid out back to back:
/// mean over the batch of the per-matrix mean squared difference of filtered matrices.
pub fn svd_mse_loss(pred: &[f64], target: &[f64], n_time: usize, channels: usize, tau: f64) -> Result<f64> {
    Ok(svd_mse_loss_grad(pred, target, n_time, channels, tau, false)?.0)
}

/// Loss and, when `with_grad`, its gradient with respect to `pred` (the target is a
/// constant). The threshold pattern is treated as locally constant.
pub fn svd_mse_loss_grad(
    pred: &[f64],
    target: &[f64],
    n_time: usize,
    channels: usize,
    tau: f64,
    with_grad: bool,
) -> Result<(f64, Vec<f64>)> {
    check_tau(tau)?;
    let per = n_time * channels;
    if pred.len() != target.len() || per == 0 || !pred.len().is_multiple_of(per) {
        return Err(Error::shape(format!(
            "prediction ({}) and target ({}) must both hold whole {n_time} x {channels} matrices",
            pred.len(),
            target.len()
        )));
    }
    let batch = pred.len() / per;
    if batch == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut loss = 0.0;
    let mut grad = if with_grad { vec![0.0; pred.len()] } else { Vec::new() };
    let scale = 1.0 / (per * batch) as f64;
    for k in 0..batch {
        let range = k * per..(k + 1) * per;
        let mp = to_matrix(&pred[range.clone()], n_time, channels)?;
        let mt = to_matrix(&target[range.clone()], n_time, channels)?;
        let sp = spectrum(&mp, tau);
        let p_pred = projector(&sp);
        let fp = &mp * &p_pred;
        let ft = &mt * projector(&spectrum(&mt, tau));
        let diff = &fp - &ft;
        loss += diff.norm_squared() * scale;
        if with_grad {
            let g_f = diff * (2.0 * scale);
            let a = mp.transpose() * &g_f;
            let a_sym = &a + a.transpose();
            let mut b = DMatrix::zeros(channels, channels);
            for i in 0..channels {
                if !sp.kept[i] {
                    continue;
                }
                for j in 0..channels {
                    if sp.kept[j] {
                        continue;
                    }
                    let gap = sp.values[i] - sp.values[j];
                    if gap <= 0.0 {
                        continue;
                    }
                    let vi = sp.vectors.column(i);
                    let vj = sp.vectors.column(j);
                    let coef = (vi.transpose() * &a_sym * vj)[(0, 0)] / gap;
                    b += vi * vj.transpose() * coef;
                }
            }
            let gm = &g_f * &p_pred + &mp * (&b + b.transpose());
            grad[range].copy_from_slice(&to_row_major(&gm));
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeds::rng(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_threshold_is_identity() {
        let m = random(30, 1);
        let f = svd_filter(&m, 10, 3, 0.0).unwrap();
        for (a, b) in f.iter().zip(&m) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn hand_rank_one_case() {
        let f = svd_filter(&[3.0, 0.0, 0.0, 1.0], 2, 2, 0.5).unwrap();
        let expect = [3.0, 0.0, 0.0, 0.0];
        for (a, b) in f.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{f:?}");
        }
    }

    #[test]
    fn idempotent_and_contracting() {
        for seed in 0..20 {
            let m = random(60, seed);
            let once = svd_filter(&m, 20, 3, 0.6).unwrap();
            let twice = svd_filter(&once, 20, 3, 0.6).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                assert!((a - b).abs() < 1e-9);
            }
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
            assert!(norm(&once) <= norm(&m) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn loss_basics() {
        let p = random(45, 3);
        let t = random(45, 4);
        assert_eq!(svd_mse_loss(&p, &p, 5, 3, 0.3).unwrap(), 0.0);
        let plain = p.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 45.0;
        assert!((svd_mse_loss(&p, &t, 5, 3, 0.0).unwrap() - plain).abs() < 1e-9);
        assert!(matches!(svd_mse_loss(&p, &t[..44], 5, 3, 0.0), Err(Error::Shape(_))));
        assert!(svd_mse_loss(&p, &t, 5, 3, 1.0).is_err());
    }

    #[test]
    fn perturbation_in_discarded_subspace_is_invisible() {
        // target: strong rank-one part plus a weak direction orthogonal to it
        let n = 6;
        let u1: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).sin()).collect();
        let u2: Vec<f64> = (0..n).map(|i| (i as f64 * 1.7).cos()).collect();
        let dot: f64 = u1.iter().zip(&u2).map(|(a, b)| a * b).sum();
        let nn: f64 = u1.iter().map(|a| a * a).sum();
        let u2: Vec<f64> = u2.iter().zip(&u1).map(|(b, a)| b - dot / nn * a).collect();
        let v1 = [1.0, 0.0, 0.0];
        let v2 = [0.0, 1.0, 0.0];
        let mut target = vec![0.0; n * 3];
        let mut pred = vec![0.0; n * 3];
        for i in 0..n {
            for c in 0..3 {
                target[i * 3 + c] = 10.0 * u1[i] * v1[c] + 0.01 * u2[i] * v2[c];
                pred[i * 3 + c] = 10.0 * u1[i] * v1[c] + 0.05 * u2[i] * v2[c];
            }
        }
        assert!(svd_mse_loss(&pred, &target, n, 3, 0.1).unwrap() < 1e-20);
    }

    fn check_gradient(tau: f64, seed: u64) {
        let (n, c, batch) = (5, 3, 2);
        let pred = random(n * c * batch, seed);
        let target = random(n * c * batch, seed + 100);
        let (_, grad) = svd_mse_loss_grad(&pred, &target, n, c, tau, true).unwrap();
        let h = 1e-6;
        for i in 0..pred.len() {
            let mut p = pred.clone();
            p[i] += h;
            let up = svd_mse_loss(&p, &target, n, c, tau).unwrap();
            p[i] -= 2.0 * h;
            let down = svd_mse_loss(&p, &target, n, c, tau).unwrap();
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(
                (fd - grad[i]).abs() / denom < 1e-5,
                "τ={tau} i={i}: fd {fd} vs {}",
                grad[i]
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        check_gradient(0.0, 10);
        check_gradient(0.5, 11);
        check_gradient(0.8, 12);
    }
}
