use crate::error::{Error, Result};
use crate::geo::angle_diff;

/// Cyclic RMSE in radians: RMS of the shortest signed differences `gt - pred`.
pub fn crmse(preds: &[f64], gts: &[f64]) -> Result<f64> {
    Ok(cyclic_mse(preds, gts)?.sqrt())
}

pub fn crmse_deg(preds: &[f64], gts: &[f64]) -> Result<f64> {
    Ok(crmse(preds, gts)?.to_degrees())
}

/// Mean squared cyclic error, the training objective.
pub fn cyclic_mse(preds: &[f64], gts: &[f64]) -> Result<f64> {
    check(preds, gts)?;
    let sum: f64 = preds.iter().zip(gts).map(|(p, g)| angle_diff(*g, *p).powi(2)).sum();
    Ok(sum / preds.len() as f64)
}

/// [`cyclic_mse`] and its gradient with respect to each prediction. The gradient is
/// undefined exactly at the ±π discontinuity.
pub fn cyclic_mse_grad(preds: &[f64], gts: &[f64]) -> Result<(f64, Vec<f64>)> {
    check(preds, gts)?;
    let n = preds.len() as f64;
    let diffs: Vec<f64> = preds.iter().zip(gts).map(|(p, g)| angle_diff(*g, *p)).collect();
    let loss = diffs.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diffs.iter().map(|d| -2.0 * d / n).collect()))
}

fn check(preds: &[f64], gts: &[f64]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if preds.len() != gts.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            gts.len()
        )));
    }
    Ok(())
}
