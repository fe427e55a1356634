//! Minimal static SVG charts: scatter and line series on linear axes, an
//! optional y = x reference line and text annotations.

use std::fmt::Write;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub label: String,
    pub min: f64,
    pub max: f64,
}

impl Axis {
    pub fn new(label: impl Into<String>, min: f64, max: f64) -> Self {
        Axis { label: label.into(), min, max }
    }

    pub fn unit(label: impl Into<String>) -> Self {
        Axis::new(label, 0.0, 1.0)
    }

    /// Range covering `values` with a small margin.
    pub fn fitted(label: impl Into<String>, values: impl IntoIterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.into_iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis::new(label, 0.0, 1.0);
        }
        if lo == hi {
            return Axis::new(label, lo - 0.5, hi + 0.5);
        }
        let pad = (hi - lo) * 0.05;
        Axis::new(label, lo - pad, hi + pad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Markers,
    Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x: Axis,
    pub y: Axis,
    pub series: Vec<Series>,
    pub identity_line: bool,
    pub annotations: Vec<String>,
}

impl Figure {
    pub fn new(title: impl Into<String>, x: Axis, y: Axis) -> Self {
        Figure { title: title.into(), x, y, series: Vec::new(), identity_line: false, annotations: Vec::new() }
    }

    pub fn with_series(mut self, name: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        self.series.push(Series { name: name.into(), points, style });
        self
    }

    pub fn with_identity_line(mut self) -> Self {
        self.identity_line = true;
        self
    }

    pub fn annotate(mut self, text: impl Into<String>) -> Self {
        self.annotations.push(text.into());
        self
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.min) / (self.x.max - self.x.min) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.min) / (self.y.max - self.y.min) * (HEIGHT - TOP - BOTTOM)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));

        let (x0, x1) = (self.px(self.x.min), self.px(self.x.max));
        let (y0, y1) = (self.py(self.y.min), self.py(self.y.max));
        let _ = writeln!(s, r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);

        for i in 0..=4 {
            let t = f64::from(i) / 4.0;
            let xv = self.x.min + t * (self.x.max - self.x.min);
            let yv = self.y.min + t * (self.y.max - self.y.min);
            let (xp, yp) = (self.px(xv), self.py(yv));
            let _ = writeln!(s, r#"<line x1="{xp:.2}" y1="{y0:.2}" x2="{xp:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 4.0);
            let _ = writeln!(s, r#"<text x="{xp:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 18.0, tick(xv));
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{yp:.2}" x2="{x0:.2}" y2="{yp:.2}" stroke="black"/>"#, x0 - 4.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 7.0, yp + 4.0, tick(yv));
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 14.0, escape(&self.x.label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&self.y.label)
        );

        if self.identity_line {
            let lo = self.x.min.max(self.y.min);
            let hi = self.x.max.min(self.y.max);
            if lo < hi {
                let _ = writeln!(
                    s,
                    r##"<line class="identity" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#555" stroke-dasharray="5,4"/>"##,
                    self.px(lo),
                    self.py(lo),
                    self.px(hi),
                    self.py(hi)
                );
            }
        }

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let _ = writeln!(s, r#"<g class="series" data-name="{}">"#, escape(&series.name));
            match series.style {
                Style::Markers => {
                    for &(x, y) in series.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.8"/>"#, self.px(x), self.py(y));
                    }
                }
                Style::Line => {
                    let pts: Vec<String> = series
                        .points
                        .iter()
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                        .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
                        .collect();
                    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
                }
            }
            let _ = writeln!(s, "</g>");
            if self.series.len() > 1 {
                let ly = TOP + 14.0 + 16.0 * i as f64;
                let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, x1 - 130.0, ly - 9.0);
                let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, x1 - 115.0, escape(&series.name));
            }
        }

        for (i, note) in self.annotations.iter().enumerate() {
            let _ = writeln!(s, r#"<text class="annotation" x="{:.2}" y="{:.2}">{}</text>"#, x0 + 8.0, y1 + 16.0 + 15.0 * i as f64, escape(note));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
