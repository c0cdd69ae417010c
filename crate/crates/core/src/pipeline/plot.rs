//! Minimal SVG line charts for the evaluation reports.

use std::fmt::Write as _;

use super::report::{EvalReport, ReportKind};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Drawn as a dashed horizontal line across the plot.
    pub horizontal: bool,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    mag * if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LineChart {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self
            .series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if !(y1 > y0) {
            y1 = y0 + 1.0;
        }
        let step = nice_step(y1 - y0);
        (x0, x1, (y0 / step).floor() * step, (y1 * 1.05 / step).ceil() * step)
    }

    pub fn to_svg(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        for (step, lo, hi, is_x) in [(nice_step(x1 - x0), x0, x1, true), (nice_step(y1 - y0), y0, y1, false)] {
            let mut v = (lo / step).ceil() * step;
            while v <= hi + step * 1e-9 {
                let label = format!("{}", (v / step).round() * step);
                if is_x {
                    let _ = writeln!(
                        s,
                        r##"<line x1="{0:.1}" y1="{1}" x2="{0:.1}" y2="{2}" stroke="#e5e5e5"/>"##,
                        sx(v),
                        TOP,
                        TOP + ph
                    );
                    let _ = writeln!(
                        s,
                        r#"<text x="{:.1}" y="{}" text-anchor="middle">{label}</text>"#,
                        sx(v),
                        TOP + ph + 18.0
                    );
                } else {
                    let _ = writeln!(
                        s,
                        r##"<line x1="{1}" y1="{0:.1}" x2="{2}" y2="{0:.1}" stroke="#e5e5e5"/>"##,
                        sy(v),
                        LEFT,
                        LEFT + pw
                    );
                    let _ = writeln!(
                        s,
                        r#"<text x="{}" y="{:.1}" text-anchor="end">{label}</text>"#,
                        LEFT - 6.0,
                        sy(v) + 4.0
                    );
                }
                v += step;
            }
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            if series.horizontal {
                if let Some(&(_, y)) = series.points.first() {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{LEFT}" y1="{0:.1}" x2="{1}" y2="{0:.1}" stroke="{color}" stroke-width="2" stroke-dasharray="6 4"/>"#,
                        sy(y),
                        LEFT + pw
                    );
                }
            } else {
                let path: Vec<String> = series
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                    path.join(" ")
                );
                for &(x, y) in &series.points {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                        sx(x),
                        sy(y)
                    );
                }
            }
            let ly = TOP + 16.0 + 16.0 * i as f64;
            let lx = LEFT + pw - 170.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                lx + 20.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}">{}</text>"#,
                lx + 26.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Chart matching the report kind: CRMSE versus averaging duration with the learned
/// methods as horizontal lines, or validation CRMSE versus `t_back`. Ablation reports
/// get a bar-like chart of train and validation CRMSE per scope.
pub fn report_chart(report: &EvalReport) -> LineChart {
    match report.kind {
        ReportKind::MethodComparison => {
            let classical = report
                .mean_by("classical", |r| Ordered(r.duration_s))
                .into_iter()
                .map(|(k, v)| (k.0, v))
                .collect();
            let mut series = vec![Series {
                label: "classical".into(),
                points: classical,
                horizontal: false,
            }];
            for m in ["baseline", "denoiser_aided"] {
                if let Some(v) = report.mean_crmse(m) {
                    series.push(Series {
                        label: m.replace('_', "-"),
                        points: vec![(0.0, v)],
                        horizontal: true,
                    });
                }
            }
            LineChart {
                title: "Heading CRMSE by method".into(),
                x_label: "averaging duration [s]".into(),
                y_label: "CRMSE [deg]".into(),
                series,
            }
        }
        ReportKind::TbackSweep => LineChart {
            title: "Validation CRMSE versus t_back".into(),
            x_label: "t_back".into(),
            y_label: "CRMSE [deg]".into(),
            series: vec![Series {
                label: "denoiser-aided".into(),
                points: report
                    .mean_by("denoiser_aided", |r| r.t_back.unwrap_or(0))
                    .into_iter()
                    .map(|(k, v)| (k as f64, v))
                    .collect(),
                horizontal: false,
            }],
        },
        ReportKind::NormalizationAblation => {
            let series = ["train", "val"]
                .iter()
                .map(|split| {
                    let m = format!("denoiser_aided_{split}");
                    Series {
                        label: (*split).into(),
                        points: report
                            .mean_by(&m, |r| r.scope.map(|s| s.as_str()))
                            .into_iter()
                            .map(|(k, v)| (if k == Some("per_sample") { 0.0 } else { 1.0 }, v))
                            .collect(),
                        horizontal: false,
                    }
                })
                .collect();
            LineChart {
                title: "CRMSE by normalization scope (0 = per sample, 1 = per sequence)".into(),
                x_label: "scope".into(),
                y_label: "CRMSE [deg]".into(),
                series,
            }
        }
    }
}

/// Training curves as a chart of validation CRMSE per epoch.
pub fn curves_chart(report: &EvalReport) -> Option<LineChart> {
    if report.curves.is_empty() {
        return None;
    }
    Some(LineChart {
        title: "Training curves".into(),
        x_label: "epoch".into(),
        y_label: "validation metric".into(),
        series: report
            .curves
            .iter()
            .map(|c| Series {
                label: c.label.clone(),
                points: c.curve.records.iter().map(|r| (r.epoch as f64, r.val)).collect(),
                horizontal: false,
            })
            .collect(),
    })
}

struct Ordered(f64);

impl PartialEq for Ordered {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Ordered {}

impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_well_formed() {
        let chart = LineChart {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![
                Series {
                    label: "s".into(),
                    points: vec![(10.0, 5.0), (20.0, 4.0), (30.0, 3.5)],
                    horizontal: false,
                },
                Series {
                    label: "h".into(),
                    points: vec![(0.0, 3.0)],
                    horizontal: true,
                },
            ],
        };
        let svg = chart.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(10.0), 2.0);
        assert_eq!(nice_step(90.0), 20.0);
        assert_eq!(nice_step(0.5), 0.1);
    }
}
