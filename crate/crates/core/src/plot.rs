//! Static SVG figures: state/input evolution for one episode and grouped
//! pass-rate bars for a robustness sweep. The files are plain text built
//! with fixed formatting, so identical inputs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::scoring::{RobustnessReport, Trajectory};
use crate::{Error, Result};

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 45.0;
/// Polylines are decimated to at most this many points per series.
const MAX_POINTS: usize = 1200;

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    values: Vec<f64>,
}

struct Panel<'a> {
    y_label: &'a str,
    series: Vec<Series<'a>>,
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    let span = (hi - lo).abs();
    if span < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn axis_ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
}

fn draw_panel(svg: &mut String, top: f64, t: &[f64], panel: &Panel) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = top + MARGIN_TOP;
    let y1 = top + PANEL_HEIGHT - MARGIN_BOTTOM;
    let (t_lo, t_hi) = (t[0], t[t.len() - 1]);
    let mut v_lo = f64::INFINITY;
    let mut v_hi = f64::NEG_INFINITY;
    for s in &panel.series {
        for v in &s.values {
            v_lo = v_lo.min(*v);
            v_hi = v_hi.max(*v);
        }
    }
    let (v_lo, v_hi) = nice_range(v_lo, v_hi);
    let sx = |v: f64| x0 + (v - t_lo) / (t_hi - t_lo) * (x1 - x0);
    let sy = |v: f64| y1 - (v - v_lo) / (v_hi - v_lo) * (y1 - y0);

    let _ = writeln!(
        svg,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333" stroke-width="1"/>"##,
        x1 - x0,
        y1 - y0
    );
    for tick in axis_ticks(v_lo, v_hi) {
        let y = sy(tick);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#ddd" stroke-width="1"/>"#
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end" fill="#333">{tick:.2}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    for tick in axis_ticks(t_lo, t_hi) {
        let x = sx(tick);
        let _ = writeln!(
            svg,
            r##"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle" fill="#333">{tick:.1}</text>"##,
            y1 + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" fill="#333" transform="rotate(-90 {:.2} {:.2})">{}</text>"##,
        x0 - 48.0,
        (y0 + y1) / 2.0,
        x0 - 48.0,
        (y0 + y1) / 2.0,
        panel.y_label
    );

    let stride = t.len().div_ceil(MAX_POINTS).max(1);
    for (si, s) in panel.series.iter().enumerate() {
        let mut points = String::new();
        for i in (0..t.len()).step_by(stride) {
            let _ = write!(points, "{:.2},{:.2} ", sx(t[i]), sy(s.values[i]));
        }
        if (t.len() - 1) % stride != 0 {
            let i = t.len() - 1;
            let _ = write!(points, "{:.2},{:.2} ", sx(t[i]), sy(s.values[i]));
        }
        let _ = writeln!(
            svg,
            r##"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"##,
            s.color,
            points.trim_end()
        );
        let lx = x0 + 10.0 + 110.0 * si as f64;
        let _ = writeln!(
            svg,
            r##"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"##,
            y0 - 10.0,
            lx + 22.0,
            y0 - 10.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="12" fill="#333">{}</text>"##,
            lx + 28.0,
            y0 - 6.0,
            s.label
        );
    }
}

/// Three stacked panels over shared time: joint angles, joint velocities,
/// applied torques.
pub fn trajectory_svg(traj: &Trajectory) -> Result<String> {
    traj.validate()?;
    let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let pick = |f: fn(&crate::scoring::TrajectorySample) -> f64| -> Vec<f64> {
        traj.samples.iter().map(f).collect()
    };
    let panels = [
        Panel {
            y_label: "angle [rad]",
            series: vec![
                Series {
                    label: "theta1",
                    color: "#1f77b4",
                    values: pick(|s| s.state.theta1),
                },
                Series {
                    label: "theta2",
                    color: "#d62728",
                    values: pick(|s| s.state.theta2),
                },
            ],
        },
        Panel {
            y_label: "velocity [rad/s]",
            series: vec![
                Series {
                    label: "omega1",
                    color: "#1f77b4",
                    values: pick(|s| s.state.omega1),
                },
                Series {
                    label: "omega2",
                    color: "#d62728",
                    values: pick(|s| s.state.omega2),
                },
            ],
        },
        Panel {
            y_label: "torque [Nm]",
            series: vec![
                Series {
                    label: "tau1",
                    color: "#1f77b4",
                    values: pick(|s| s.tau.tau1),
                },
                Series {
                    label: "tau2",
                    color: "#d62728",
                    values: pick(|s| s.tau.tau2),
                },
            ],
        },
    ];

    let height = PANEL_HEIGHT * panels.len() as f64 + 20.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="white"/>"##);
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut svg, PANEL_HEIGHT * i as f64, &t, p);
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" fill="#333">t [s]</text>"##,
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        height - 6.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Grouped bars: one group per perturbation category, one bar per
/// magnitude point, height = pass fraction.
pub fn robustness_svg(report: &RobustnessReport) -> Result<String> {
    if report.categories.is_empty() {
        return Err(Error::Config("robustness report has no categories".into()));
    }
    let height = 420.0;
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = MARGIN_TOP + 10.0;
    let y1 = height - 70.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="white"/>"##);
    let _ = writeln!(
        svg,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333" stroke-width="1"/>"##,
        x1 - x0,
        y1 - y0
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let y = y1 - frac * (y1 - y0);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#ddd" stroke-width="1"/>"#
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end" fill="#333">{frac:.2}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" fill="#333" transform="rotate(-90 {:.2} {:.2})">pass fraction</text>"##,
        x0 - 44.0,
        (y0 + y1) / 2.0,
        x0 - 44.0,
        (y0 + y1) / 2.0
    );

    let groups = report.categories.len();
    let group_w = (x1 - x0) / groups as f64;
    for (gi, cat) in report.categories.iter().enumerate() {
        let gx = x0 + gi as f64 * group_w;
        let bars = cat.points.len().max(1);
        let slot = (group_w * 0.8) / bars as f64;
        let pad = group_w * 0.1;
        for (bi, point) in cat.points.iter().enumerate() {
            let frac = point.pass_rate;
            let bx = gx + pad + bi as f64 * slot;
            let bh = frac * (y1 - y0);
            let _ = writeln!(
                svg,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="#1f77b4" stroke="#10509e" stroke-width="0.5"/>"##,
                bx,
                y1 - bh,
                slot * 0.85
            );
            let _ = writeln!(
                svg,
                r##"<text x="{:.2}" y="{:.2}" font-size="9" text-anchor="middle" fill="#333">{:.3}</text>"##,
                bx + slot * 0.425,
                y1 + 12.0,
                point.magnitude
            );
        }
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" fill="#333">{}</text>"##,
            gx + group_w / 2.0,
            y1 + 30.0,
            cat.label
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" fill="#333">pass {:.2}</text>"##,
            gx + group_w / 2.0,
            y1 + 46.0,
            cat.pass_fraction
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_trajectory_plot(path: &Path, traj: &Trajectory) -> Result<()> {
    fs::write(path, trajectory_svg(traj)?)?;
    Ok(())
}

pub fn write_robustness_plot(path: &Path, report: &RobustnessReport) -> Result<()> {
    fs::write(path, robustness_svg(report)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ActuationSetting, ModelParams};
    use crate::reward::RewardConfig;
    use crate::scoring::{EpisodeRunner, ZeroController};

    fn sample_trajectory() -> Trajectory {
        let model = ModelParams::with_setting(ActuationSetting::Pendubot);
        let runner = EpisodeRunner::new(model, RewardConfig::pendubot());
        runner.run(&mut ZeroController, None, 1)
    }

    #[test]
    fn trajectory_figure_is_deterministic_and_complete() {
        let traj = sample_trajectory();
        let a = trajectory_svg(&traj).unwrap();
        let b = trajectory_svg(&traj).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<polyline").count(), 6);
        for label in ["theta1", "omega2", "tau1", "angle [rad]", "torque [Nm]"] {
            assert!(a.contains(label), "missing {label}");
        }
    }

    #[test]
    fn long_series_are_decimated() {
        let traj = sample_trajectory();
        let svg = trajectory_svg(&traj).unwrap();
        let first_polyline = svg
            .split("<polyline")
            .nth(1)
            .unwrap()
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        let n_points = first_polyline.split_whitespace().count();
        assert!(n_points <= MAX_POINTS + 1, "{n_points} points");
        assert!(n_points > 100);
    }

    #[test]
    fn robustness_figure_draws_one_bar_per_magnitude() {
        use crate::scoring::{CategoryOutcome, MagnitudePoint};
        let report = RobustnessReport {
            categories: vec![
                CategoryOutcome {
                    label: "torque_noise".into(),
                    points: vec![
                        MagnitudePoint {
                            magnitude: 0.1,
                            trials: 2,
                            passes: 2,
                            pass_rate: 1.0,
                        },
                        MagnitudePoint {
                            magnitude: 0.5,
                            trials: 2,
                            passes: 0,
                            pass_rate: 0.0,
                        },
                    ],
                    pass_fraction: 0.5,
                },
                CategoryOutcome {
                    label: "torque_delay".into(),
                    points: vec![MagnitudePoint {
                        magnitude: 0.01,
                        trials: 2,
                        passes: 1,
                        pass_rate: 0.5,
                    }],
                    pass_fraction: 0.5,
                },
            ],
            score: 0.5,
        };
        let svg = robustness_svg(&report).unwrap();
        // Background + frame + 3 bars.
        assert_eq!(svg.matches("<rect").count(), 5);
        assert!(svg.contains("torque_noise"));
        assert!(svg.contains("torque_delay"));
        let empty = RobustnessReport {
            categories: vec![],
            score: 0.0,
        };
        assert!(robustness_svg(&empty).is_err());
    }

    #[test]
    fn plots_write_to_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectory.svg");
        write_trajectory_plot(&path, &sample_trajectory()).unwrap();
        let data = std::fs::read_to_string(&path).unwrap();
        assert!(data.starts_with("<svg"));
    }
}
