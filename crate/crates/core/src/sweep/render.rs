use std::fmt::Write as _;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::engine::SweepResult;
use super::SweepError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Style {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: u32,
    pub height: u32,
    /// Color (or y) limits in dB; derived from the data when absent.
    pub db_range: Option<(f64, f64)>,
    /// Show at most this many overlay markers per branch.
    pub max_markers: usize,
}

impl Default for Style {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            width: 720,
            height: 480,
            db_range: None,
            max_markers: 60,
        }
    }
}

const LEFT: f64 = 80.0;
const RIGHT: f64 = 110.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn viridis(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let s = t * 4.0;
    let i = (s.floor() as usize).min(3);
    let f = s - i as f64;
    let mut rgb = [0u8; 3];
    for k in 0..3 {
        rgb[k] = (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8;
    }
    rgb
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round-number tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    pw: f64,
    ph: f64,
}

impl Frame {
    fn new(style: &Style, x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
        let (x0, x1) = pad(x);
        let (y0, y1) = pad(y);
        Self {
            x0,
            x1,
            y0,
            y1,
            pw: f64::from(style.width) - LEFT - RIGHT,
            ph: f64::from(style.height) - TOP - BOTTOM,
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * self.pw
    }

    fn py(&self, y: f64) -> f64 {
        TOP + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.ph
    }
}

fn open_svg(out: &mut String, style: &Style) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = style.width,
        h = style.height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !style.title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            f64::from(style.width) / 2.0,
            escape(&style.title)
        );
    }
}

fn axes(out: &mut String, frame: &Frame, style: &Style) {
    let _ = writeln!(
        out,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        LEFT, TOP, frame.pw, frame.ph
    );
    let bottom = TOP + frame.ph;
    for t in ticks(frame.x0, frame.x1, 6) {
        let x = frame.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(frame.y0, frame.y1, 6) {
        let y = frame.py(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + frame.pw / 2.0,
        f64::from(style.height) - 12.0,
        escape(&style.x_label)
    );
    let cy = TOP + frame.ph / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="18" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 18 {cy:.2})">{}</text>"#,
        escape(&style.y_label)
    );
}

fn encode_png(width: u32, height: u32, rgb: &[u8]) -> Result<Vec<u8>, SweepError> {
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, width, height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| SweepError::Render(e.to_string()))?;
        writer
            .write_image_data(rgb)
            .map_err(|e| SweepError::Render(e.to_string()))?;
    }
    Ok(buf)
}

fn db_limits(values: impl Iterator<Item = f64>, style: &Style) -> (f64, f64) {
    if let Some(r) = style.db_range {
        return r;
    }
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (-60.0, 0.0);
    }
    (lo.max(hi - 60.0), hi)
}

/// Heatmap of a sweep (x: sweep value, y: probe frequency, color: dB) with the
/// analytic overlay drawn as open circles. The grid is embedded as a PNG data URI.
pub fn render_heatmap(result: &SweepResult, style: &Style) -> Result<String, SweepError> {
    let cols = result.sweep_values.len();
    let rows = result.frequencies.len();
    if cols == 0 || rows == 0 {
        return Err(SweepError::EmptyResult);
    }
    let db: Vec<Vec<f64>> = (0..cols).map(|c| result.column_db(c)).collect();
    let (lo, hi) = db_limits(db.iter().flatten().copied(), style);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut rgb = Vec::with_capacity(3 * cols * rows);
    for r in (0..rows).rev() {
        for col in &db {
            rgb.extend_from_slice(&viridis((col[r] - lo) / span));
        }
    }
    let png = encode_png(cols as u32, rows as u32, &rgb)?;
    let data = base64::engine::general_purpose::STANDARD.encode(png);

    let xs = &result.sweep_values;
    let fs = &result.frequencies;
    let frame = Frame::new(style, (xs[0], xs[cols - 1]), (fs[0], fs[rows - 1]));

    let mut out = String::new();
    open_svg(&mut out, style);
    let _ = writeln!(
        out,
        r#"<image x="{LEFT:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" preserveAspectRatio="none" style="image-rendering:pixelated" href="data:image/png;base64,{data}"/>"#,
        frame.pw, frame.ph
    );

    let with_overlay: Vec<usize> = (0..cols).filter(|&c| !result.overlay[c].is_empty()).collect();
    if !with_overlay.is_empty() {
        let stride = with_overlay.len().div_ceil(style.max_markers.max(1)).max(1);
        out.push_str("<g fill=\"none\" stroke=\"white\" stroke-width=\"1.2\">\n");
        for &c in with_overlay.iter().step_by(stride) {
            for &f in &result.overlay[c] {
                if f < frame.y0 || f > frame.y1 {
                    continue;
                }
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#,
                    frame.px(xs[c]),
                    frame.py(f)
                );
            }
        }
        out.push_str("</g>\n");
    }
    axes(&mut out, &frame, style);

    // color bar
    let bx = f64::from(style.width) - RIGHT + 20.0;
    let steps = 64;
    let h = frame.ph / f64::from(steps);
    for i in 0..steps {
        let t = 1.0 - (f64::from(i) + 0.5) / f64::from(steps);
        let [r, g, b] = viridis(t);
        let _ = writeln!(
            out,
            r##"<rect x="{bx:.2}" y="{:.2}" width="16" height="{:.2}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
            TOP + f64::from(i) * h,
            h + 0.5
        );
    }
    for t in ticks(lo, hi, 5) {
        let y = TOP + (1.0 - (t - lo) / span) * frame.ph;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            bx + 20.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}">dB</text>"#,
        bx,
        TOP - 6.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSeries {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Line plot of one or more traces sharing the axes.
pub fn render_lines(series: &[LineSeries], style: &Style) -> Result<String, SweepError> {
    let points = || series.iter().flat_map(|s| s.x.iter().zip(&s.y));
    if points().next().is_none() {
        return Err(SweepError::EmptyResult);
    }
    let fold = |it: &mut dyn Iterator<Item = f64>| {
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let xr = fold(&mut points().map(|(x, _)| *x));
    let yr = match style.db_range {
        Some(r) => r,
        None => {
            let (lo, hi) = fold(&mut points().map(|(_, y)| *y));
            let pad = 0.05 * (hi - lo).max(1.0);
            (lo - pad, hi + pad)
        }
    };
    let frame = Frame::new(style, xr, yr);

    let mut out = String::new();
    open_svg(&mut out, style);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        for (x, y) in s.x.iter().zip(&s.y) {
            let y = y.clamp(frame.y0, frame.y1);
            let _ = write!(path, "{:.2},{:.2} ", frame.px(*x), frame.py(y));
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.trim_end()
        );
        let ly = TOP + 16.0 * (k as f64 + 1.0);
        let lx = f64::from(style.width) - RIGHT + 8.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            lx + 22.0,
            escape(&s.label)
        );
    }
    axes(&mut out, &frame, style);
    out.push_str("</svg>\n");
    Ok(out)
}
