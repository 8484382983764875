//! Static SVG line charts for energy histories.
//!
//! Hand-rolled on purpose: runs produce a handful of fixed chart shapes
//! (energy against time or the weight, linear or log scale, with an optional
//! envelope overlay), and a plotting dependency would dwarf the need.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 52.0;
/// Polylines are decimated to roughly this many vertices.
const MAX_POINTS: usize = 2000;

pub const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, color: &'static str, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), color, dashed: false, points }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    match raw / mag {
        x if x <= 1.0 => mag,
        x if x <= 2.0 => 2.0 * mag,
        x if x <= 5.0 => 5.0 * mag,
        _ => 10.0 * mag,
    }
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let step = nice_step(hi - lo);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let mut ticks = Vec::new();
    let mut k = (lo / step).ceil() as i64;
    while (k as f64) * step <= hi + 1e-9 * step {
        let v = k as f64 * step;
        ticks.push((v, format!("{v:.decimals$}")));
        k += 1;
    }
    ticks
}

/// Decade ticks in log10 space, strided when the range spans many decades.
fn log_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let stride = (((hi - lo) / 8.0).ceil() as i64).max(1);
    let mut ticks = Vec::new();
    let mut k = (lo.ceil() as i64).div_euclid(stride) * stride;
    while k < lo.ceil() as i64 {
        k += stride;
    }
    while (k as f64) <= hi + 1e-9 {
        ticks.push((k as f64, format!("1e{k}")));
        k += stride;
    }
    ticks
}

fn decimate(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let mut out: Vec<(f64, f64)> = points.iter().copied().step_by(stride).collect();
    if out.last() != points.last() {
        out.push(*points.last().unwrap());
    }
    out
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (v - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

impl Chart {
    pub fn render(&self) -> String {
        // Transform to plotting coordinates first; log charts drop
        // nonpositive values instead of failing.
        let mapped: Vec<(usize, Vec<(f64, f64)>)> = self
            .series
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let pts: Vec<(f64, f64)> = decimate(&s.points)
                    .into_iter()
                    .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || *y > 0.0))
                    .map(|(x, y)| (x, if self.log_y { y.log10() } else { y }))
                    .collect();
                (i, pts)
            })
            .filter(|(_, pts)| !pts.is_empty())
            .collect();

        let mut x_lo = f64::INFINITY;
        let mut x_hi = f64::NEG_INFINITY;
        let mut y_lo = f64::INFINITY;
        let mut y_hi = f64::NEG_INFINITY;
        for (_, pts) in &mapped {
            for &(x, y) in pts {
                x_lo = x_lo.min(x);
                x_hi = x_hi.max(x);
                y_lo = y_lo.min(y);
                y_hi = y_hi.max(y);
            }
        }
        if !x_lo.is_finite() {
            (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
        }
        if x_hi - x_lo < 1e-300 {
            x_lo -= 0.5;
            x_hi += 0.5;
        }
        if y_hi - y_lo < 1e-300 {
            y_lo -= 0.5;
            y_hi += 0.5;
        }
        let frame = Frame { x_lo, x_hi, y_lo, y_hi };

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">"
        );
        let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
            (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
            escape(&self.title)
        );

        let x_ticks = linear_ticks(x_lo, x_hi);
        let y_ticks =
            if self.log_y { log_ticks(y_lo, y_hi) } else { linear_ticks(y_lo, y_hi) };
        for (v, label) in &x_ticks {
            let px = frame.x(*v);
            let _ = writeln!(
                svg,
                "<line x1=\"{px:.1}\" y1=\"{MARGIN_TOP}\" x2=\"{px:.1}\" y2=\"{:.1}\" \
                 stroke=\"#dddddd\"/>",
                HEIGHT - MARGIN_BOTTOM
            );
            let _ = writeln!(
                svg,
                "<text x=\"{px:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
                HEIGHT - MARGIN_BOTTOM + 16.0,
                escape(label)
            );
        }
        for (v, label) in &y_ticks {
            let py = frame.y(*v);
            let _ = writeln!(
                svg,
                "<line x1=\"{MARGIN_LEFT}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" \
                 stroke=\"#dddddd\"/>",
                WIDTH - MARGIN_RIGHT
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
                MARGIN_LEFT - 6.0,
                py + 4.0,
                escape(label)
            );
        }
        let _ = writeln!(
            svg,
            "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{:.1}\" height=\"{:.1}\" \
             fill=\"none\" stroke=\"#333333\"/>",
            WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        );

        for (i, pts) in &mapped {
            let s = &self.series[*i];
            let mut d = String::with_capacity(pts.len() * 14);
            for (j, &(x, y)) in pts.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2}", if j == 0 { "" } else { " " }, frame.x(x), frame.y(y));
            }
            let dash = if s.dashed { " stroke-dasharray=\"7,4\"" } else { "" };
            let _ = writeln!(
                svg,
                "<polyline points=\"{d}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"{dash}/>",
                s.color
            );
        }

        // Legend, top right inside the frame.
        for (row, (i, _)) in mapped.iter().enumerate() {
            let s = &self.series[*i];
            let ly = MARGIN_TOP + 16.0 + 18.0 * row as f64;
            let lx = WIDTH - MARGIN_RIGHT - 180.0;
            let dash = if s.dashed { " stroke-dasharray=\"7,4\"" } else { "" };
            let _ = writeln!(
                svg,
                "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
                 stroke=\"{}\" stroke-width=\"1.6\"{dash}/>",
                lx + 26.0,
                s.color
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{}</text>",
                lx + 32.0,
                ly + 4.0,
                escape(&s.label)
            );
        }

        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
            (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            "<text x=\"18\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" \
             transform=\"rotate(-90 18 {:.1})\">{}</text>",
            (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0,
            (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0,
            escape(&self.y_label)
        );
        svg.push_str("</svg>\n");
        svg
    }
}

pub fn write_svg(path: &Path, chart: &Chart) -> Result<(), CliError> {
    std::fs::write(path, chart.render())
        .map_err(|e| CliError::Io { path: path.into(), source: e })
}
