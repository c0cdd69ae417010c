use gyrodiff_wasm::{classical_error_curve, horizontal_rate_curve, schedule_curves};

#[test]
fn classical_curve_shrinks_with_averaging_time() {
    let c = classical_error_curve(32.0, 0.05, 1e-4, 100.0, 600.0, 36, 7).unwrap();
    assert_eq!(c.len(), 10);
    assert!(c.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(c[9] < c[0], "{c:?}");
}

#[test]
fn classical_curve_is_deterministic_and_validates() {
    let a = classical_error_curve(10.0, 0.05, 0.0, 30.0, 30.0, 8, 3).unwrap();
    let b = classical_error_curve(10.0, 0.05, 0.0, 30.0, 30.0, 8, 3).unwrap();
    assert_eq!(a, b);
    assert!(classical_error_curve(10.0, -1.0, 0.0, 30.0, 30.0, 8, 3).is_err());
    assert!(classical_error_curve(10.0, 0.05, 0.0, 30.0, 31.0, 8, 3).is_err());
}

#[test]
fn schedule_curves_are_linear_and_decreasing() {
    let v = schedule_curves(1000, 1e-4, 5e-4).unwrap();
    let (beta, abar) = v.split_at(1000);
    assert!((beta[0] - (1e-4 + 4e-4 / 1000.0)).abs() < 1e-15 && (beta[999] - 5e-4).abs() < 1e-15);
    assert!((abar[0] - (1.0 - beta[0])).abs() < 1e-15);
    assert!(abar.windows(2).all(|w| w[1] < w[0]));
    assert!(schedule_curves(0, 1e-4, 5e-4).is_err());
}

#[test]
fn horizontal_rate_peaks_at_equator() {
    let r = horizontal_rate_curve();
    assert_eq!(r.len(), 181);
    let eq = 7.292115e-5f64.to_degrees();
    assert!((r[90] - eq).abs() < 1e-15);
    assert!(r[0].abs() < 1e-18 && r[180].abs() < 1e-18);
    assert!((r[90 + 60] - eq / 2.0).abs() < 1e-12);
}
