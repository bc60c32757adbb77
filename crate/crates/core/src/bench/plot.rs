//! Static SVG learning-curve plots with byte-stable output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::LearningCurve;
use crate::classify::ClassifierKind;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

fn color(kind: ClassifierKind) -> &'static str {
    match kind {
        ClassifierKind::NaiveBayes => "#1f77b4",
        ClassifierKind::Logistic => "#d62728",
        ClassifierKind::SmartBayes => "#2ca02c",
    }
}

/// Top of the error axis: the largest mean error rounded up to a multiple
/// of 0.05 (at least 0.05).
pub fn y_axis_max(curve: &LearningCurve) -> f64 {
    let top = curve.rows.iter().map(|r| r.mean_error).fold(0.0, f64::max);
    // Guard against 0.15 turning into 0.2 through rounding in the division.
    let steps = (top / 0.05 - 1e-9).ceil().max(1.0);
    steps * 0.05
}

pub fn render_svg(curve: &LearningCurve) -> Result<String> {
    if curve.rows.is_empty() {
        return Err(Error::Empty("cannot plot an empty curve".into()));
    }
    let sorted = LearningCurve::new(curve.rows.clone());
    let x_min = sorted.rows.iter().map(|r| r.train_size).min().unwrap_or(0) as f64;
    let mut x_max = sorted.rows.iter().map(|r| r.train_size).max().unwrap_or(0) as f64;
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    let y_max = y_axis_max(&sorted);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + (1.0 - y / y_max) * plot_h;

    let mut s = String::new();
    let mut w = |line: String| {
        s.push_str(&line);
        s.push('\n');
    };
    w(format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    ));
    w(format!(r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#));
    w(format!(
        r#"<g id="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h,
        TOP + plot_h
    ));

    let mut ticks = String::new();
    let steps = (y_max / 0.05).round() as usize;
    let every = steps.div_ceil(10);
    for k in (0..=steps).step_by(every) {
        let v = k as f64 * 0.05;
        write!(
            ticks,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            sy(v) + 4.0
        )
        .expect("string write");
    }
    w(format!(r#"<g id="y-axis" data-max="{y_max:.2}">{ticks}</g>"#));

    let mut sizes: Vec<usize> = sorted.rows.iter().map(|r| r.train_size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let stride = sizes.len().div_ceil(8);
    let mut ticks = String::new();
    for &m in sizes.iter().step_by(stride) {
        write!(
            ticks,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{m}</text>"#,
            sx(m as f64),
            TOP + plot_h + 18.0
        )
        .expect("string write");
    }
    w(format!(r#"<g id="x-axis">{ticks}</g>"#));
    w(format!(
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">training size</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    ));
    w(format!(
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">mean misclassification rate</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    ));

    for (i, kind) in sorted.classifiers().into_iter().enumerate() {
        let points: Vec<String> = sorted
            .rows
            .iter()
            .filter(|r| r.classifier == kind)
            .map(|r| format!("{:.2},{:.2}", sx(r.train_size as f64), sy(r.mean_error)))
            .collect();
        w(format!(
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            color(kind),
            points.join(" ")
        ));
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        w(format!(
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{}</text></g>"#,
            lx + 25.0,
            color(kind),
            lx + 32.0,
            ly + 4.0,
            kind.label()
        ));
    }
    w("</svg>".to_string());
    Ok(s)
}

pub fn emit_svg_plot(curve: &LearningCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_svg(curve)?).map_err(|e| Error::io(path, e))
}
