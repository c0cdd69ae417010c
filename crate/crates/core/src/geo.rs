//! Earth-rate geometry for stationary gyrocompassing.
//!
//! Frames: body (b, sensor fixed), navigation (n, north-east-down) and ECEF (e).
//! All angles are radians; degrees appear only at the CLI and report boundary.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::synth::TimeSequence;

pub type Mat3 = [[f64; 3]; 3];

/// WGS-84 earth rotation rate, rad/s.
pub const EARTH_RATE: f64 = 7.292115e-5;

/// Below this magnitude both heading components are treated as carrying no information.
const DEGENERATE_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        debug_assert!((-PI..=PI).contains(&roll));
        debug_assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&pitch));
        Self {
            roll,
            pitch,
            yaw: wrap_two_pi(yaw),
        }
    }

    pub fn leveled(yaw: f64) -> Self {
        Self::new(0.0, 0.0, yaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPosition {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoPosition {
    pub fn new(latitude: f64, longitude: f64) -> Self {
        debug_assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&latitude));
        debug_assert!((-PI..=PI).contains(&longitude));
        Self { latitude, longitude }
    }

    pub fn at_latitude(latitude: f64) -> Self {
        Self::new(latitude, 0.0)
    }
}

/// Body-frame angular rate, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AngularRate {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl AngularRate {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn scaled(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }
}

impl From<[f64; 3]> for AngularRate {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// The earth model is fixed to WGS-84; the type exists so call sites name it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EarthModel;

impl EarthModel {
    pub fn rate(self) -> f64 {
        EARTH_RATE
    }
}

/// Wraps any finite angle into `[0, 2π)`.
pub fn wrap_two_pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Shortest signed angular difference `a - b`, in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    d.sin().atan2(d.cos())
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, row) in m.iter().enumerate() {
        out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
    }
    out
}

pub fn transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

pub fn determinant(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Navigation-to-body direction cosine matrix `T^b_n` (roll-pitch-yaw sequence).
pub fn body_to_nav_matrix(angles: EulerAngles) -> Mat3 {
    let (sr, cr) = angles.roll.sin_cos();
    let (sp, cp) = angles.pitch.sin_cos();
    let (sy, cy) = angles.yaw.sin_cos();
    [
        [cp * cy, cp * sy, -sp],
        [sr * sp * cy - cr * sy, sr * sp * sy + cr * cy, sr * cp],
        [cr * sp * cy + sr * sy, cr * sp * sy - sr * cy, cr * cp],
    ]
}

/// ECEF-to-NED rotation `T^n_e`.
pub fn ecef_to_nav_matrix(pos: GeoPosition) -> Mat3 {
    let (sl, cl) = pos.latitude.sin_cos();
    let (so, co) = pos.longitude.sin_cos();
    [[-sl * co, -sl * so, cl], [-so, co, 0.0], [-cl * co, -cl * so, -sl]]
}

/// Earth rotation as sensed by a stationary gyro triad: `T^b_n T^n_e (0, 0, ω_ie)`.
pub fn earth_rate_in_body(angles: EulerAngles, pos: GeoPosition, earth: EarthModel) -> AngularRate {
    let m = mat_mul(&body_to_nav_matrix(angles), &ecef_to_nav_matrix(pos));
    mat_vec(&m, [0.0, 0.0, earth.rate()]).into()
}

/// Largest horizontal earth-rate magnitude available at a latitude, rad/s.
pub fn max_horizontal_signal(pos: GeoPosition, earth: EarthModel) -> f64 {
    earth.rate() * pos.latitude.cos()
}

/// Heading from gyro rates at a known roll and pitch.
pub fn heading_from_rates(rates: AngularRate, roll: f64, pitch: f64) -> Result<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let s = -rates.y * cr + rates.z * sr;
    let c = rates.x * cp + rates.y * sr * sp + rates.z * cr * sp;
    atan2_heading(s, c)
}

/// Leveled special case: `atan2(-ω_y, ω_x)`.
pub fn heading_from_rates_leveled(rates: AngularRate) -> Result<f64> {
    atan2_heading(-rates.y, rates.x)
}

fn atan2_heading(s: f64, c: f64) -> Result<f64> {
    if s.abs() < DEGENERATE_EPS && c.abs() < DEGENERATE_EPS {
        return Err(Error::DegenerateSignal);
    }
    Ok(wrap_two_pi(s.atan2(c)))
}

/// Number of leading samples covered by a window, tolerant to float noise in `window * rate`.
pub fn window_samples(window_s: f64, sample_rate: f64) -> usize {
    (window_s * sample_rate + 1e-9).floor().max(0.0) as usize
}

/// Model-based gyrocompassing: average the first `window_s` seconds of each channel, then
/// apply the leveled heading formula.
pub fn classical_gyrocompass(seq: &TimeSequence, window_s: f64) -> Result<f64> {
    let duration = seq.duration();
    if window_s > duration + 1e-9 {
        return Err(Error::WindowTooLong {
            window_s,
            duration_s: duration,
        });
    }
    let n = window_samples(window_s, seq.sample_rate).min(seq.len());
    if n == 0 {
        return Err(Error::EmptyWindow);
    }
    let mut mean = [0.0; 3];
    for row in seq.rows().take(n) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let inv = 1.0 / n as f64;
    heading_from_rates_leveled(AngularRate::new(mean[0] * inv, mean[1] * inv, mean[2] * inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_mat_eq(a: &Mat3, b: &Mat3, tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(a[i][j], b[i][j], epsilon = tol);
            }
        }
    }

    #[test]
    fn body_matrix_examples() {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_mat_eq(&body_to_nav_matrix(EulerAngles::leveled(0.0)), &id, 0.0);
        let quarter = body_to_nav_matrix(EulerAngles::leveled(FRAC_PI_2));
        assert_mat_eq(&quarter, &[[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], 1e-15);
    }

    #[test]
    fn ecef_matrix_examples() {
        let m = ecef_to_nav_matrix(GeoPosition::new(0.0, 0.0));
        assert_mat_eq(&m, &[[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]], 0.0);
        let pole = ecef_to_nav_matrix(GeoPosition::new(FRAC_PI_2, 0.0));
        assert_abs_diff_eq!(pole[0][0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pole[0][1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pole[0][2], 0.0, epsilon = 1e-15);
        // row 3 must be orthogonal to rows 1 and 2 away from the special points
        let m = ecef_to_nav_matrix(GeoPosition::new(0.7, -2.1));
        let mmt = mat_mul(&m, &transpose(&m));
        assert_mat_eq(&mmt, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 1e-15);
    }

    #[test]
    fn earth_rate_examples() {
        let e = EarthModel;
        let eq = GeoPosition::at_latitude(0.0);
        let r = earth_rate_in_body(EulerAngles::leveled(0.0), eq, e);
        assert_abs_diff_eq!(r.x, EARTH_RATE, epsilon = 1e-20);
        assert_abs_diff_eq!(r.y, 0.0, epsilon = 1e-20);
        assert_abs_diff_eq!(r.z, 0.0, epsilon = 1e-20);

        let r = earth_rate_in_body(EulerAngles::leveled(FRAC_PI_2), eq, e);
        assert_abs_diff_eq!(r.x, 0.0, epsilon = 1e-19);
        assert_abs_diff_eq!(r.y, -EARTH_RATE, epsilon = 1e-19);

        for yaw in [0.0, 1.0, 4.0] {
            let r = earth_rate_in_body(EulerAngles::leveled(yaw), GeoPosition::at_latitude(FRAC_PI_2), e);
            assert_abs_diff_eq!(r.x, 0.0, epsilon = 1e-19);
            assert_abs_diff_eq!(r.y, 0.0, epsilon = 1e-19);
            assert_abs_diff_eq!(r.z, -EARTH_RATE, epsilon = 1e-19);
        }
    }

    #[test]
    fn leveled_rate_matches_closed_form() {
        let (yaw, lat) = (2.3_f64, -0.4_f64);
        let r = earth_rate_in_body(EulerAngles::leveled(yaw), GeoPosition::at_latitude(lat), EarthModel);
        let w = EARTH_RATE;
        assert_abs_diff_eq!(r.x, w * yaw.cos() * lat.cos(), epsilon = 1e-19);
        assert_abs_diff_eq!(r.y, -w * yaw.sin() * lat.cos(), epsilon = 1e-19);
        assert_abs_diff_eq!(r.z, -w * lat.sin(), epsilon = 1e-19);
    }

    #[test]
    fn max_signal_examples() {
        let e = EarthModel;
        assert_eq!(max_horizontal_signal(GeoPosition::at_latitude(0.0), e), EARTH_RATE);
        assert_abs_diff_eq!(
            max_horizontal_signal(GeoPosition::at_latitude(FRAC_PI_2), e),
            0.0,
            epsilon = 1e-20
        );
        let dps = max_horizontal_signal(GeoPosition::at_latitude(32.11_f64.to_radians()), e).to_degrees();
        assert!((dps - 0.0035).abs() / 0.0035 < 0.02, "{dps}");
    }

    #[test]
    fn heading_round_trips() {
        let e = EarthModel;
        let r = earth_rate_in_body(
            EulerAngles::leveled(30f64.to_radians()),
            GeoPosition::at_latitude(0.0),
            e,
        );
        let h = heading_from_rates(r, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(h, 30f64.to_radians(), epsilon = 1e-9);
        assert_eq!(h, heading_from_rates_leveled(r).unwrap());

        let att = EulerAngles::new(10f64.to_radians(), 5f64.to_radians(), 200f64.to_radians());
        let r = earth_rate_in_body(att, GeoPosition::at_latitude(45f64.to_radians()), e);
        let h = heading_from_rates(r, att.roll, att.pitch).unwrap();
        assert_abs_diff_eq!(h, 200f64.to_radians(), epsilon = 1e-9);
    }

    #[test]
    fn degenerate_at_pole() {
        let pole = AngularRate::new(0.0, 0.0, -EARTH_RATE);
        assert!(matches!(
            heading_from_rates(pole, 0.0, 0.0),
            Err(Error::DegenerateSignal)
        ));
        assert!(matches!(heading_from_rates_leveled(pole), Err(Error::DegenerateSignal)));
    }

    #[test]
    fn leveled_examples() {
        let w = EARTH_RATE;
        assert_eq!(heading_from_rates_leveled(AngularRate::new(w, 0.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            heading_from_rates_leveled(AngularRate::new(0.0, -w, 0.0)).unwrap(),
            FRAC_PI_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            heading_from_rates_leveled(AngularRate::new(-3.0, 0.0, 0.0)).unwrap(),
            PI,
            epsilon = 1e-15
        );
    }

    #[test]
    fn wrap_edges() {
        assert_eq!(wrap_two_pi(-1e-20), 0.0);
        assert_eq!(wrap_two_pi(TAU), 0.0);
        assert_abs_diff_eq!(wrap_two_pi(-FRAC_PI_2), 1.5 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(
            angle_diff(359f64.to_radians(), 1f64.to_radians()),
            -2f64.to_radians(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn classical_on_constant_sequence() {
        let seq = TimeSequence::clean(123f64.to_radians(), 0.3, 100.0, 3.0).unwrap();
        for w in [1.0, 10.0, 55.0, 100.0] {
            assert_abs_diff_eq!(
                classical_gyrocompass(&seq, w).unwrap(),
                123f64.to_radians(),
                epsilon = 1e-9
            );
        }
        assert!(matches!(classical_gyrocompass(&seq, 0.1), Err(Error::EmptyWindow)));
        assert!(matches!(
            classical_gyrocompass(&seq, 101.0),
            Err(Error::WindowTooLong { .. })
        ));
    }
}
