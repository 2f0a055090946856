//! Minimal SVG line charts for training curves and backtest overlays.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// `(x, y)` points; non-finite values break the line.
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
            style: Style::Line,
        }
    }

    pub fn markers(mut self) -> Self {
        self.style = Style::Markers;
        self
    }

    /// Points at x = 0, 1, 2, ...
    pub fn indexed(name: impl Into<String>, ys: &[f64]) -> Self {
        Self::new(name, ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect())
    }
}

fn bounds(series: &[Series]) -> Option<(f64, f64, f64, f64)> {
    let pts = series
        .iter()
        .flat_map(|s| &s.points)
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let mut b: Option<(f64, f64, f64, f64)> = None;
    for &(x, y) in pts {
        b = Some(match b {
            None => (x, x, y, y),
            Some((x0, x1, y0, y1)) => (x0.min(x), x1.max(x), y0.min(y), y1.max(y)),
        });
    }
    b.map(|(x0, x1, y0, y1)| {
        let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 1.0, x1 + 1.0) };
        let (y0, y1) = if y1 > y0 { (y0, y1) } else { (y0 - 1.0, y1 + 1.0) };
        (x0, x1, y0, y1)
    })
}

/// Renders the series as a standalone SVG document. Output depends only on
/// the inputs.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );

    if let Some((x0, x1, y0, y1)) = bounds(series) {
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN + ph - (y - y0) / (y1 - y0) * ph;
        for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN - 4.0,
                y + 4.0,
                tick(v)
            );
        }
        for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
            let _ = writeln!(
                svg,
                r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#,
                MARGIN + ph + 14.0,
                tick(v)
            );
        }
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                svg,
                r##"<line x1="{MARGIN}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="#bbb" stroke-dasharray="4 3"/>"##,
                MARGIN + pw,
                sy(0.0),
                sy(0.0)
            );
        }
        for (i, s) in series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            if s.style == Style::Markers {
                for &(x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                        sx(x),
                        sy(y)
                    );
                }
            }
            let mut d = String::new();
            let mut pen_down = false;
            for &(x, y) in s.points.iter().filter(|_| s.style == Style::Line) {
                if !(x.is_finite() && y.is_finite()) {
                    pen_down = false;
                    continue;
                }
                let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
                pen_down = true;
            }
            if !d.is_empty() {
                let _ = writeln!(
                    svg,
                    r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                    d.trim_end()
                );
            }
            let ly = MARGIN + 14.0 + 14.0 * i as f64;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
                MARGIN + 8.0,
                escape(&s.name)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
