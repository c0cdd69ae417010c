use crate::error::{Error, Result};

/// Exponential decay `η_t = η_max γ^t` with `γ = (η_min / η_max)^(1/N)`, evaluated as
/// `η_max (η_min / η_max)^(t / N)` so that `η_N` lands on `η_min`.
pub fn lr_at_epoch(epoch: usize, eta_max: f64, eta_min: f64, epochs: usize) -> Result<f64> {
    if !(eta_min > 0.0 && eta_min <= eta_max) {
        return Err(Error::config("heading.eta_min/eta_max", "need 0 < eta_min <= eta_max"));
    }
    if epochs == 0 {
        if eta_min != eta_max {
            return Err(Error::config("heading.epochs", "decay over zero epochs is undefined"));
        }
        return Ok(eta_max);
    }
    let frac = epoch as f64 / epochs as f64;
    Ok(eta_max * (eta_min / eta_max).powf(frac))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(lr_at_epoch(0, 0.005, 0.0005, 300).unwrap(), 0.005);
        let end = lr_at_epoch(300, 0.005, 0.0005, 300).unwrap();
        assert!((end / 0.0005 - 1.0).abs() < 1e-12);
        let mid = lr_at_epoch(150, 0.005, 0.0005, 300).unwrap();
        assert!((mid - (0.005f64 * 0.0005).sqrt()).abs() < 1e-15);
        assert!((mid - 1.5811e-3).abs() < 1e-7);
    }

    #[test]
    fn strictly_decreasing() {
        let lrs: Vec<f64> = (0..=50).map(|t| lr_at_epoch(t, 0.005, 0.0005, 50).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn zero_epochs() {
        assert!(lr_at_epoch(0, 0.005, 0.0005, 0).is_err());
        assert_eq!(lr_at_epoch(0, 0.005, 0.005, 0).unwrap(), 0.005);
    }
}
