//! Browser bindings for three small interactive views: classical gyrocompassing error
//! versus averaging time, the diffusion noise schedule, and the horizontal earth-rate
//! signal versus latitude. The plain functions are usable from Rust; the
//! `#[wasm_bindgen]` wrappers expose them to JavaScript as `Float64Array`s.

use gyrodiff::diffusion::NoiseSchedule;
use gyrodiff::geo::{self, EarthModel, GeoPosition};
use gyrodiff::heading::crmse_deg;
use gyrodiff::synth::{add_sensor_noise, downsample, NoiseModel, TimeSequence};
use wasm_bindgen::prelude::*;

fn js_err(e: gyrodiff::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Monte-Carlo CRMSE (degrees) of classical gyrocompassing for averaging windows of
/// `10, 20, ..., duration_s` seconds. Sensor noise is synthesized at `source_hz` and
/// block-averaged to 3 Hz, as in the training data.
#[allow(clippy::too_many_arguments)]
pub fn classical_error_curve(
    latitude_deg: f64,
    white_noise_deg_s: f64,
    bias_deg_s: f64,
    duration_s: f64,
    source_hz: f64,
    headings: usize,
    seed: u64,
) -> gyrodiff::Result<Vec<f64>> {
    let d = std::f64::consts::PI / 180.0;
    let noise = NoiseModel {
        white_noise_std: white_noise_deg_s * d,
        constant_bias_std: bias_deg_s * d,
        fixed_bias: [0.0; 3],
        seed,
    };
    noise.validate()?;
    let headings = headings.max(1);
    let windows: Vec<f64> = (1..=(duration_s / 10.0).floor() as usize)
        .map(|k| 10.0 * k as f64)
        .collect();
    let mut estimates = vec![Vec::with_capacity(headings); windows.len()];
    let mut truth = Vec::with_capacity(headings);
    for i in 0..headings {
        let psi = 2.0 * std::f64::consts::PI * i as f64 / headings as f64;
        let raw = TimeSequence::clean(psi, latitude_deg * d, duration_s, source_hz)?;
        let seq = downsample(
            &add_sensor_noise(&raw, &noise.with_seed(seed.wrapping_add(i as u64))),
            3.0,
        )?;
        for (w, est) in windows.iter().zip(&mut estimates) {
            est.push(geo::classical_gyrocompass(&seq, *w)?);
        }
        truth.push(psi);
    }
    estimates.iter().map(|e| crmse_deg(e, &truth)).collect()
}

/// `[β_1..β_T, ᾱ_1..ᾱ_T]` of the linear schedule.
pub fn schedule_curves(steps: usize, beta_min: f64, beta_max: f64) -> gyrodiff::Result<Vec<f64>> {
    let s = NoiseSchedule::linear(steps, beta_min, beta_max)?;
    Ok(s.betas().iter().chain(s.alpha_bars()).copied().collect())
}

/// Horizontal earth-rate magnitude in deg/s for latitudes `-90..=90` in 1° steps.
pub fn horizontal_rate_curve() -> Vec<f64> {
    (-90..=90)
        .map(|lat| {
            geo::max_horizontal_signal(GeoPosition::at_latitude((lat as f64).to_radians()), EarthModel).to_degrees()
        })
        .collect()
}

#[wasm_bindgen(js_name = classicalErrorCurve)]
#[allow(clippy::too_many_arguments)]
pub fn classical_error_curve_js(
    latitude_deg: f64,
    white_noise_deg_s: f64,
    bias_deg_s: f64,
    duration_s: f64,
    source_hz: f64,
    headings: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    classical_error_curve(
        latitude_deg,
        white_noise_deg_s,
        bias_deg_s,
        duration_s,
        source_hz,
        headings,
        seed as u64,
    )
    .map_err(js_err)
}

#[wasm_bindgen(js_name = scheduleCurves)]
pub fn schedule_curves_js(steps: usize, beta_min: f64, beta_max: f64) -> Result<Vec<f64>, JsError> {
    schedule_curves(steps, beta_min, beta_max).map_err(js_err)
}

#[wasm_bindgen(js_name = horizontalRateCurve)]
pub fn horizontal_rate_curve_js() -> Vec<f64> {
    horizontal_rate_curve()
}
