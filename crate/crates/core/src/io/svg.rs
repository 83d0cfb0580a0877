//! Standalone SVG scatter plots.
//!
//! Output is hand-assembled text with fixed float formatting so that equal
//! inputs give byte-identical files. Primary points are `<circle>` elements,
//! overlay points are `<rect>` squares and analytic curves are `<polyline>`s,
//! which keeps the documents easy to assert on structurally.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::csv::write_file;
use crate::Result;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 120.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Palette {
    /// Blue through white to red; suited to signed quantities.
    Diverging,
    /// Dark purple through green to yellow.
    Sequential,
}

impl Palette {
    fn stops(self) -> &'static [(f64, [u8; 3])] {
        match self {
            Palette::Diverging => &[(0.0, [33, 102, 172]), (0.5, [247, 247, 247]), (1.0, [178, 24, 43])],
            Palette::Sequential => &[
                (0.0, [68, 1, 84]),
                (0.25, [59, 82, 139]),
                (0.5, [33, 145, 140]),
                (0.75, [94, 201, 98]),
                (1.0, [253, 231, 37]),
            ],
        }
    }

    /// Colour at `t ∈ [0, 1]` (clamped).
    pub fn color(self, t: f64) -> String {
        let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
        let stops = self.stops();
        let i = stops.windows(2).position(|w| t <= w[1].0).unwrap_or(stops.len() - 2);
        let (t0, c0) = stops[i];
        let (t1, c1) = stops[i + 1];
        let f = (t - t0) / (t1 - t0);
        let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
        format!("#{:02x}{:02x}{:02x}", mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    /// Drives the fill colour.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub color_label: String,
    pub palette: Palette,
    /// Fixed colour range; the data range is used when `None`.
    pub color_range: Option<(f64, f64)>,
    pub points: Vec<ScatterPoint>,
    pub overlays: Vec<Overlay>,
    pub curves: Vec<Curve>,
}

impl ScatterPlot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        ScatterPlot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            color_label: String::new(),
            palette: Palette::Sequential,
            color_range: None,
            points: Vec::new(),
            overlays: Vec::new(),
            curves: Vec::new(),
        }
    }
}

/// What was drawn and what had to be left out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SvgStats {
    pub circles: usize,
    pub squares: usize,
    pub polylines: usize,
    pub dropped_non_finite: usize,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Round tick spacing giving roughly `target` intervals over `span`.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = tick_step(hi - lo, 6.0);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (-1.0, 1.0);
    }
    let span = hi - lo;
    if span <= 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn finite2(x: f64, y: f64) -> bool {
    x.is_finite() && y.is_finite()
}

/// Render `plot`; non-finite points are skipped and counted.
pub fn render_svg(plot: &ScatterPlot) -> (String, SvgStats) {
    let mut stats = SvgStats::default();
    let points: Vec<&ScatterPoint> = plot
        .points
        .iter()
        .filter(|p| {
            let keep = finite2(p.x, p.y) && p.value.is_finite();
            stats.dropped_non_finite += usize::from(!keep);
            keep
        })
        .collect();
    let overlays: Vec<(&str, Vec<(f64, f64)>)> = plot
        .overlays
        .iter()
        .map(|o| {
            let kept: Vec<(f64, f64)> = o.points.iter().copied().filter(|&(x, y)| finite2(x, y)).collect();
            stats.dropped_non_finite += o.points.len() - kept.len();
            (o.label.as_str(), kept)
        })
        .collect();
    let curves: Vec<(&str, Vec<(f64, f64)>)> = plot
        .curves
        .iter()
        .map(|c| {
            let kept: Vec<(f64, f64)> = c.points.iter().copied().filter(|&(x, y)| finite2(x, y)).collect();
            stats.dropped_non_finite += c.points.len() - kept.len();
            (c.label.as_str(), kept)
        })
        .collect();

    let all_xy = points
        .iter()
        .map(|p| (p.x, p.y))
        .chain(overlays.iter().flat_map(|o| o.1.iter().copied()))
        .chain(curves.iter().flat_map(|c| c.1.iter().copied()));
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all_xy {
        xlo = xlo.min(x);
        xhi = xhi.max(x);
        ylo = ylo.min(y);
        yhi = yhi.max(y);
    }
    let (xlo, xhi) = padded_range(xlo, xhi);
    let (ylo, yhi) = padded_range(ylo, yhi);
    let (clo, chi) = plot.color_range.unwrap_or_else(|| {
        let lo = points.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else if lo.is_finite() {
            (lo - 0.5, lo + 0.5)
        } else {
            (0.0, 1.0)
        }
    });

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - xlo) / (xhi - xlo) * pw;
    let sy = |y: f64| TOP + (yhi - y) / (yhi - ylo) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(&plot.title));
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="28" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&plot.title)
    );

    // Axes and ticks.
    let _ = writeln!(s, r##"<g class="axes" stroke="#000000" fill="none">"##);
    let _ = writeln!(s, r#"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{pw:.1}" height="{ph:.1}"/>"#);
    for t in ticks(xlo, xhi) {
        let x = sx(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/>"#, TOP + ph, TOP + ph + 5.0);
    }
    for t in ticks(ylo, yhi) {
        let y = sy(t);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}"/>"#, LEFT - 5.0);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g class="tick-labels" fill="#000000">"##);
    for t in ticks(xlo, xhi) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(t),
            TOP + ph + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(ylo, yhi) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            sy(t) + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );
    let _ = writeln!(s, "</g>");

    for (label, pts) in &curves {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r##"<polyline class="curve" data-label="{}" fill="none" stroke="#555555" stroke-width="1" points="{}"/>"##,
            escape(label),
            coords.join(" ")
        );
        stats.polylines += 1;
    }
    for (label, pts) in &overlays {
        let _ = writeln!(s, r##"<g class="overlay" data-label="{}" fill="#222222">"##, escape(label));
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="3" height="3"/>"#, sx(x) - 1.5, sy(y) - 1.5);
            stats.squares += 1;
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, r##"<g class="points" stroke="#000000" stroke-width="0.4">"##);
    for p in &points {
        let t = (p.value - clo) / (chi - clo);
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
            sx(p.x),
            sy(p.y),
            plot.palette.color(t)
        );
        stats.circles += 1;
    }
    let _ = writeln!(s, "</g>");

    // Colour bar.
    let bx = WIDTH - RIGHT + 30.0;
    let _ = writeln!(s, r#"<defs><linearGradient id="colorbar" x1="0" y1="1" x2="0" y2="0">"#);
    for &(t, _) in plot.palette.stops() {
        let _ = writeln!(s, r#"<stop offset="{t:.2}" stop-color="{}"/>"#, plot.palette.color(t));
    }
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(
        s,
        r##"<g class="colorbar"><rect x="{bx:.1}" y="{TOP:.1}" width="16" height="{ph:.1}" fill="url(#colorbar)" stroke="#000000"/>"##
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, bx + 20.0, TOP + 10.0, tick_label(chi));
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, bx + 20.0, TOP + ph, tick_label(clo));
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text></g>"#,
        bx + 8.0,
        TOP - 8.0,
        escape(&plot.color_label)
    );
    let _ = writeln!(s, "</svg>");
    (s, stats)
}

pub fn emit_svg_scatter(path: &Path, plot: &ScatterPlot) -> Result<SvgStats> {
    let (svg, stats) = render_svg(plot);
    write_file(path, svg.as_bytes())?;
    Ok(stats)
}
