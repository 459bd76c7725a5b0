//! Minimal self-contained SVG charts.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct Bar {
    pub label: String,
    pub value: f64,
    /// Half-height of the error bar.
    pub error: Option<f64>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        } else if !log && lo > 0.0 {
            lo = 0.0;
        }
        Axis { lo, hi, log }
    }

    /// Fraction along the axis, `None` for values a log axis cannot show.
    fn frac(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let v = if self.log { v.log10() } else { v };
        Some(((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            (self.lo as i32..=self.hi as i32)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect()
        } else {
            (0..=4)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                    (v, format!("{}", (v * 1000.0).round() / 1000.0))
                })
                .collect()
        }
    }
}

fn plot_x(frac: f64) -> f64 {
    MARGIN_LEFT + frac * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
}

fn plot_y(frac: f64) -> f64 {
    HEIGHT - MARGIN_BOTTOM - frac * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, y: &Axis) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (plot_x(0.0), plot_x(1.0), plot_y(0.0), plot_y(1.0));
    let _ = writeln!(
        out,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
    );
    for (v, text) in y.ticks() {
        if let Some(f) = y.frac(v) {
            let py = plot_y(f);
            let _ = writeln!(
                out,
                r##"<line x1="{x0}" y1="{py}" x2="{x1}" y2="{py}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
                x0 - 6.0,
                py + 4.0,
                text
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

/// Line chart of several series; non-positive values are dropped on a log axis.
pub fn line_chart(
    series: &[Series],
    title: &str,
    x_label: &str,
    y_label: &str,
    log_y: bool,
) -> String {
    let x = Axis::fit(
        series.iter().flat_map(|s| s.points.iter().map(|p| p.0)),
        false,
    );
    let y = Axis::fit(
        series.iter().flat_map(|s| s.points.iter().map(|p| p.1)),
        log_y,
    );
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, &y);
    for (v, text) in x.ticks() {
        if let Some(f) = x.frac(v) {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                plot_x(f),
                plot_y(0.0) + 16.0,
                text
            );
        }
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter_map(|&(px, py)| Some((x.frac(px)?, y.frac(py)?)))
            .map(|(fx, fy)| format!("{:.2},{:.2}", plot_x(fx), plot_y(fy)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        let ly = MARGIN_TOP + 16.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart with optional symmetric error bars.
pub fn bar_chart(bars: &[Bar], title: &str, y_label: &str, log_y: bool) -> String {
    let y = Axis::fit(
        bars.iter()
            .flat_map(|b| [b.value, b.value + b.error.unwrap_or(0.0)]),
        log_y,
    );
    let mut out = String::new();
    frame(&mut out, title, "", y_label, &y);
    let slot = (plot_x(1.0) - plot_x(0.0)) / bars.len().max(1) as f64;
    for (i, b) in bars.iter().enumerate() {
        let left = plot_x(0.0) + slot * i as f64 + slot * 0.15;
        let width = slot * 0.7;
        let base = plot_y(0.0);
        if let Some(f) = y.frac(b.value) {
            let top = plot_y(f);
            let _ = writeln!(
                out,
                r#"<rect x="{left:.2}" y="{top:.2}" width="{width:.2}" height="{:.2}" fill="{}"/>"#,
                base - top,
                PALETTE[0]
            );
            if let Some(err) = b.error {
                let hi = y.frac(b.value + err).map(plot_y);
                let lo = y.frac((b.value - err).max(f64::MIN_POSITIVE)).map(plot_y);
                if let (Some(hi), Some(lo)) = (hi, lo) {
                    let cx = left + width / 2.0;
                    let _ = writeln!(
                        out,
                        r#"<line x1="{cx:.2}" y1="{hi:.2}" x2="{cx:.2}" y2="{lo:.2}" stroke="black"/>"#
                    );
                }
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" transform="rotate(-30 {:.2} {:.2})">{}</text>"#,
            left + width / 2.0,
            base + 14.0,
            left + width / 2.0,
            base + 14.0,
            escape(&b.label)
        );
    }
    out.push_str("</svg>\n");
    out
}
