//! Minimal native SVG plotting: line, scatter and bar series with axes,
//! reference lines and a legend. No external plotting process; output is
//! deterministic for identical inputs. Each series group carries a
//! `data-count` attribute so tests can assert embedded point counts.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    Line,
    Scatter,
    Bars,
}

#[derive(Debug, Clone)]
struct Series {
    label: String,
    style: SeriesStyle,
    points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: f64,
    pub height: f64,
    series: Vec<Series>,
    hlines: Vec<(f64, String)>,
    x_range: Option<(f64, f64)>,
    y_range: Option<(f64, f64)>,
}

impl Figure {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Figure {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            width: 820.0,
            height: 520.0,
            series: Vec::new(),
            hlines: Vec::new(),
            x_range: None,
            y_range: None,
        }
    }

    pub fn line(&mut self, label: &str, points: Vec<(f64, f64)>) -> &mut Self {
        self.series.push(Series { label: label.to_string(), style: SeriesStyle::Line, points });
        self
    }

    pub fn scatter(&mut self, label: &str, points: Vec<(f64, f64)>) -> &mut Self {
        self.series.push(Series { label: label.to_string(), style: SeriesStyle::Scatter, points });
        self
    }

    pub fn bars(&mut self, label: &str, points: Vec<(f64, f64)>) -> &mut Self {
        self.series.push(Series { label: label.to_string(), style: SeriesStyle::Bars, points });
        self
    }

    pub fn hline(&mut self, y: f64, label: &str) -> &mut Self {
        self.hlines.push((y, label.to_string()));
        self
    }

    pub fn with_y_range(&mut self, lo: f64, hi: f64) -> &mut Self {
        self.y_range = Some((lo, hi));
        self
    }

    fn data_ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &(px, py) in &s.points {
                if px.is_finite() {
                    x = (x.0.min(px), x.1.max(px));
                }
                if py.is_finite() {
                    y = (y.0.min(py), y.1.max(py));
                }
            }
        }
        for &(hy, _) in &self.hlines {
            y = (y.0.min(hy), y.1.max(hy));
        }
        if !x.0.is_finite() {
            x = (0.0, 1.0);
        }
        if !y.0.is_finite() {
            y = (0.0, 1.0);
        }
        if x.0 == x.1 {
            x = (x.0 - 0.5, x.1 + 0.5);
        }
        if y.0 == y.1 {
            y = (y.0 - 0.5, y.1 + 0.5);
        }
        let x = self.x_range.unwrap_or_else(|| pad_range(x));
        let y = self.y_range.unwrap_or_else(|| pad_range(y));
        (x, y)
    }

    pub fn render(&self) -> String {
        let (xr, yr) = self.data_ranges();
        let (ml, mr, mt, mb) = (72.0, 18.0, 42.0, 54.0);
        let pw = self.width - ml - mr;
        let ph = self.height - mt - mb;
        let to_px = |x: f64| ml + (x - xr.0) / (xr.1 - xr.0) * pw;
        let to_py = |y: f64| mt + ph - (y - yr.0) / (yr.1 - yr.0) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"##,
            self.width, self.height, self.width, self.height
        );
        let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="white"/>"##);
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="24" font-size="16" text-anchor="middle" font-family="sans-serif">{}</text>"##,
            ml + pw / 2.0,
            escape(&self.title)
        );

        // Axes box and ticks.
        let _ = writeln!(
            out,
            r##"<rect x="{ml:.1}" y="{mt:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#333" stroke-width="1"/>"##
        );
        for i in 0..=5 {
            let fx = xr.0 + (xr.1 - xr.0) * i as f64 / 5.0;
            let px = to_px(fx);
            let _ = writeln!(
                out,
                r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#ccc" stroke-width="0.5"/>"##,
                mt,
                mt + ph
            );
            let _ = writeln!(
                out,
                r##"<text x="{px:.1}" y="{:.1}" font-size="11" text-anchor="middle" font-family="sans-serif">{}</text>"##,
                mt + ph + 16.0,
                tick(fx)
            );
            let fy = yr.0 + (yr.1 - yr.0) * i as f64 / 5.0;
            let py = to_py(fy);
            let _ = writeln!(
                out,
                r##"<line x1="{ml:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ccc" stroke-width="0.5"/>"##,
                ml + pw
            );
            let _ = writeln!(
                out,
                r##"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end" font-family="sans-serif">{}</text>"##,
                ml - 6.0,
                py + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle" font-family="sans-serif">{}</text>"##,
            ml + pw / 2.0,
            self.height - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r##"<text x="16" y="{:.1}" font-size="13" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 16 {:.1})">{}</text>"##,
            mt + ph / 2.0,
            mt + ph / 2.0,
            escape(&self.y_label)
        );

        for (hy, label) in &self.hlines {
            let py = to_py(*hy);
            let _ = writeln!(
                out,
                r##"<line x1="{ml:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#555" stroke-width="1" stroke-dasharray="6 4"/>"##,
                ml + pw
            );
            let _ = writeln!(
                out,
                r##"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end" font-family="sans-serif" fill="#555">{}</text>"##,
                ml + pw - 4.0,
                py - 4.0,
                escape(label)
            );
        }

        for (si, s) in self.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            let finite: Vec<(f64, f64)> =
                s.points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
            let _ = writeln!(
                out,
                r##"<g class="series" data-label="{}" data-count="{}">"##,
                escape(&s.label),
                finite.len()
            );
            match s.style {
                SeriesStyle::Line => {
                    let mut pts = String::new();
                    for (x, y) in &finite {
                        let _ = write!(pts, "{:.2},{:.2} ", to_px(*x), to_py(*y));
                    }
                    let _ = writeln!(
                        out,
                        r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"/>"##,
                        pts.trim_end()
                    );
                }
                SeriesStyle::Scatter => {
                    for (x, y) in &finite {
                        let _ = writeln!(
                            out,
                            r##"<circle cx="{:.2}" cy="{:.2}" r="2.4" fill="{color}" fill-opacity="0.65"/>"##,
                            to_px(*x),
                            to_py(*y)
                        );
                    }
                }
                SeriesStyle::Bars => {
                    let bar_w = if finite.len() > 1 {
                        (to_px(finite[1].0) - to_px(finite[0].0)).abs() * 0.8
                    } else {
                        pw / 10.0
                    };
                    let base = to_py(yr.0.max(0.0));
                    for (x, y) in &finite {
                        let py = to_py(*y);
                        let _ = writeln!(
                            out,
                            r##"<rect x="{:.2}" y="{:.2}" width="{bar_w:.2}" height="{:.2}" fill="{color}" fill-opacity="0.7"/>"##,
                            to_px(*x) - bar_w / 2.0,
                            py.min(base),
                            (base - py).abs()
                        );
                    }
                }
            }
            let _ = writeln!(out, "</g>");
        }

        // Legend, top-right inside the plot area.
        for (si, s) in self.series.iter().enumerate() {
            if s.label.is_empty() {
                continue;
            }
            let color = PALETTE[si % PALETTE.len()];
            let y = mt + 16.0 + 16.0 * si as f64;
            let _ = writeln!(
                out,
                r##"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"##,
                ml + pw - 150.0,
                y - 9.0
            );
            let _ = writeln!(
                out,
                r##"<text x="{:.1}" y="{y:.1}" font-size="11" font-family="sans-serif">{}</text>"##,
                ml + pw - 136.0,
                escape(&s.label)
            );
        }

        out.push_str("</svg>\n");
        out
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.render())
    }
}

fn pad_range((lo, hi): (f64, f64)) -> (f64, f64) {
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 10000.0 || a < 0.01 {
        format!("{v:.1e}")
    } else if a >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Count of data points embedded in a rendered figure (sums the
/// `data-count` attributes), for output validation.
pub fn embedded_point_count(svg_text: &str) -> usize {
    let mut total = 0;
    for part in svg_text.split("data-count=\"").skip(1) {
        if let Some(end) = part.find('"') {
            if let Ok(n) = part[..end].parse::<usize>() {
                total += n;
            }
        }
    }
    total
}
