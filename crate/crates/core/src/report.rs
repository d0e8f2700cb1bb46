//! Self-contained SVG charts and their CSV data: mean amplitude against force
//! for each reference frequency, and tolerance-band bar charts.
//!
//! All coordinates are printed with fixed precision, so identical inputs give
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dataset::CalibrationDataset;
use crate::dsp::REFERENCE_FREQS_HZ;
use crate::io::write_atomic;
use crate::metrics::ToleranceReport;
use crate::simskin::Location;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("EmptyInput: nothing to plot")]
    EmptyInput,
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 110.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const COLOURS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

/// Mean amplitude per distinct force level for one location.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSeries {
    pub location: Location,
    /// `(force_n, mean amplitude per frequency)`, ascending force.
    pub points: Vec<(f64, [f64; 4])>,
}

pub fn amplitude_series(ds: &CalibrationDataset) -> Result<Vec<AmplitudeSeries>, ReportError> {
    if ds.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    // Per location, keyed by force bits: (force, amplitude sums, count).
    type Levels = BTreeMap<u64, (f64, [f64; 4], usize)>;
    let mut acc: BTreeMap<Location, Levels> = BTreeMap::new();
    for r in &ds.records {
        // Forces are non-negative, so bit patterns sort numerically.
        let e = acc.entry(r.location).or_default().entry(r.force_n.to_bits()).or_insert((r.force_n, [0.0; 4], 0));
        for (sum, v) in e.1.iter_mut().zip(r.features.to_array()) {
            *sum += v;
        }
        e.2 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(location, levels)| AmplitudeSeries {
            location,
            points: levels.into_values().map(|(force, sum, n)| (force, sum.map(|s| s / n as f64))).collect(),
        })
        .collect())
}

pub fn amplitude_csv(series: &[AmplitudeSeries]) -> String {
    let mut out = String::from("location,force_n,a300,a500,a700,a900\n");
    for s in series {
        for (force, a) in &s.points {
            let _ = writeln!(out, "{},{},{},{},{},{}", s.location, force, a[0], a[1], a[2], a[3]);
        }
    }
    out
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        MARGIN_L + (x - self.x0) / span * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        HEIGHT - MARGIN_B - (y - self.y0) / span * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn svg_open(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, title);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        HEIGHT - 15.0,
        x_label
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        y_label
    );
}

fn draw_axes(out: &mut String, axes: &Axes, x_ticks: &[f64], y_ticks: &[f64], y_fmt: fn(f64) -> String) {
    let (left, right) = (MARGIN_L, WIDTH - MARGIN_R);
    let (top, bottom) = (MARGIN_T, HEIGHT - MARGIN_B);
    let _ = writeln!(out, r#"<path d="M{left:.1} {top:.1} V{bottom:.1} H{right:.1}" fill="none" stroke="black"/>"#);
    for &t in x_ticks {
        let x = axes.px(t);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{bottom:.1}" x2="{x:.2}" y2="{:.1}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, bottom + 18.0, t);
    }
    for &t in y_ticks {
        let y = axes.py(t);
        let _ = writeln!(out, r#"<line x1="{:.1}" y1="{y:.2}" x2="{left:.1}" y2="{y:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#, left - 8.0, y + 4.0, y_fmt(t));
    }
}

fn ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect()
}

/// Line chart of mean amplitude against force at one frequency, one
/// polyline per location.
pub fn amplitude_svg(series: &[AmplitudeSeries], freq_index: usize) -> String {
    let freq = REFERENCE_FREQS_HZ[freq_index];
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x1, mut y0, mut y1) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for (f, a) in all {
        x1 = x1.max(*f);
        y0 = y0.min(a[freq_index]);
        y1 = y1.max(a[freq_index]);
    }
    let pad = ((y1 - y0) * 0.05).max(1e-6);
    let axes = Axes { x0: 0.0, x1, y0: (y0 - pad).max(0.0), y1: y1 + pad };

    let mut out = String::new();
    svg_open(&mut out, &format!("Amplitude at {freq} Hz"), "Force (N)", "Amplitude");
    draw_axes(&mut out, &axes, &ticks(0.0, x1, 6), &ticks(axes.y0, axes.y1, 5), |v| format!("{v:.3}"));
    for (s, colour) in series.iter().zip(COLOURS.iter().cycle()) {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|(f, a)| format!("{:.2},{:.2}", axes.px(*f), axes.py(a[freq_index])))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline data-location="{}" points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            s.location,
            pts.join(" ")
        );
    }
    for (i, (s, colour)) in series.iter().zip(COLOURS.iter().cycle()).enumerate() {
        let y = MARGIN_T + 10.0 + 18.0 * i as f64;
        let x = WIDTH - MARGIN_R + 15.0;
        let _ = writeln!(out, r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{colour}" stroke-width="3"/>"#, x + 20.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">Location {}</text>"#, x + 26.0, y + 4.0, s.location);
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped bar chart: one group per labelled report, one bar per tolerance.
pub fn tolerance_svg(reports: &[(String, ToleranceReport)]) -> Result<String, ReportError> {
    let tolerances: Vec<f64> = reports.first().ok_or(ReportError::EmptyInput)?.1.pct_within.iter().map(|(t, _)| *t).collect();
    let groups = reports.len() as f64;
    let axes = Axes { x0: 0.0, x1: groups, y0: 0.0, y1: 100.0 };
    let mut out = String::new();
    svg_open(&mut out, "Force predictions within tolerance", "Model", "Predictions within tolerance (%)");
    draw_axes(&mut out, &axes, &[], &ticks(0.0, 100.0, 5), |v| format!("{v:.0}"));
    let slot = axes.px(1.0) - axes.px(0.0);
    let bar = slot * 0.8 / tolerances.len().max(1) as f64;
    for (g, (label, report)) in reports.iter().enumerate() {
        let gx = axes.px(g as f64) + slot * 0.1;
        for (b, (_, pct)) in report.pct_within.iter().enumerate() {
            let x = gx + bar * b as f64;
            let y = axes.py(*pct);
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
                axes.py(0.0) - y,
                COLOURS[b % COLOURS.len()]
            );
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{pct:.1}</text>"#, x + bar / 2.0, y - 3.0);
        }
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{label}</text>"#, gx + slot * 0.4, HEIGHT - MARGIN_B + 18.0);
    }
    for (i, t) in tolerances.iter().enumerate() {
        let y = MARGIN_T + 10.0 + 18.0 * i as f64;
        let x = WIDTH - MARGIN_R + 15.0;
        let _ = writeln!(out, r#"<rect x="{x:.1}" y="{:.1}" width="14" height="10" fill="{}"/>"#, y - 5.0, COLOURS[i % COLOURS.len()]);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">&#177;{t} N</text>"#, x + 20.0, y + 4.0);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn tolerance_csv(reports: &[(String, ToleranceReport)]) -> String {
    let mut out = String::from("model,tolerance_n,pct_within\n");
    for (label, r) in reports {
        for (t, p) in &r.pct_within {
            let _ = writeln!(out, "{label},{t},{p}");
        }
    }
    out
}

/// Writes `amplitude_<freq>hz.svg` for each frequency plus `amplitude.csv`,
/// and `tolerance.svg` / `tolerance.csv` when tolerance reports are given.
/// Returns the written paths in creation order.
pub fn write_report(
    ds: &CalibrationDataset,
    tolerance: &[(String, ToleranceReport)],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    let series = amplitude_series(ds)?;
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut emit = |name: String, body: &str| -> Result<(), ReportError> {
        let path = out_dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
        Ok(())
    };
    for (i, f) in REFERENCE_FREQS_HZ.iter().enumerate() {
        emit(format!("amplitude_{f}hz.svg"), &amplitude_svg(&series, i))?;
    }
    emit("amplitude.csv".into(), &amplitude_csv(&series))?;
    if !tolerance.is_empty() {
        emit("tolerance.svg".into(), &tolerance_svg(tolerance)?)?;
        emit("tolerance.csv".into(), &tolerance_csv(tolerance))?;
    }
    Ok(written)
}

/// Parses the `points` attribute of every `<polyline>` in an SVG produced by
/// [`amplitude_svg`], in document order.
pub fn polyline_points(svg: &str) -> Vec<Vec<(f64, f64)>> {
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .filter_map(|l| {
            let start = l.find("points=\"")? + 8;
            let end = start + l[start..].find('"')?;
            Some(
                l[start..end]
                    .split(' ')
                    .filter_map(|p| {
                        let (x, y) = p.split_once(',')?;
                        Some((x.parse().ok()?, y.parse().ok()?))
                    })
                    .collect(),
            )
        })
        .collect()
}
