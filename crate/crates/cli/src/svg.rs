//! Minimal static SVG charts: a polyline per series with optional error
//! bars, linear or decade-log axes. No interactivity, no dependencies.

use std::fmt::Write;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric error bar per point, same length as `points` when present.
    pub errors: Option<Vec<f64>>,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const W: f64 = 840.0;
const H: f64 = 560.0;
const ML: f64 = 90.0;
const MR: f64 = 30.0;
const MT: f64 = 50.0;
const MB: f64 = 70.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

impl Chart {
    pub fn render(&self) -> String {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for s in &self.series {
            for (i, &(x, y)) in s.points.iter().enumerate() {
                let e = s.errors.as_ref().map_or(0.0, |e| e[i]);
                if usable(x, self.log_x) && usable(y - e, self.log_y) && usable(y + e, false) {
                    pts.push((x, y + e));
                    pts.push((x, (y - e).max(if self.log_y { y * 1e-3 } else { y - e })));
                }
            }
        }
        let (x0, x1) = axis_range(pts.iter().map(|p| p.0), self.log_x);
        let (y0, y1) = axis_range(pts.iter().map(|p| p.1), self.log_y);
        let sx = |x: f64| ML + (tr(x, self.log_x) - x0) / (x1 - x0) * (W - ML - MR);
        let sy = |y: f64| H - MB - (tr(y, self.log_y) - y0) / (y1 - y0) * (H - MT - MB);

        let mut out = String::new();
        let _ = write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="14">"#
        );
        let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = write!(
            out,
            r#"<text x="{}" y="26" text-anchor="middle" font-size="17">{}</text>"#,
            W / 2.0,
            esc(&self.title)
        );

        // axes
        let _ = write!(
            out,
            r##"<rect x="{ML}" y="{MT}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            W - ML - MR,
            H - MT - MB
        );
        for (t, label) in ticks(x0, x1, self.log_x) {
            let px = ML + (t - x0) / (x1 - x0) * (W - ML - MR);
            let _ = write!(
                out,
                r##"<line x1="{px:.1}" y1="{}" x2="{px:.1}" y2="{}" stroke="#ccc"/>"##,
                MT,
                H - MB
            );
            let _ = write!(
                out,
                r#"<text x="{px:.1}" y="{}" text-anchor="middle">{label}</text>"#,
                H - MB + 22.0
            );
        }
        for (t, label) in ticks(y0, y1, self.log_y) {
            let py = H - MB - (t - y0) / (y1 - y0) * (H - MT - MB);
            let _ = write!(
                out,
                r##"<line x1="{ML}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#ccc"/>"##,
                W - MR
            );
            let _ = write!(
                out,
                r#"<text x="{}" y="{py:.1}" text-anchor="end" dominant-baseline="middle">{label}</text>"#,
                ML - 8.0
            );
        }
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 18.0,
            esc(&self.x_label)
        );
        let _ = write!(
            out,
            r#"<text x="22" y="{}" text-anchor="middle" transform="rotate(-90 22 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            esc(&self.y_label)
        );

        for (si, s) in self.series.iter().enumerate() {
            let color = COLORS[si % COLORS.len()];
            let mut path = String::new();
            for &(x, y) in &s.points {
                if !usable(x, self.log_x) || !usable(y, self.log_y) {
                    continue;
                }
                let cmd = if path.is_empty() { 'M' } else { 'L' };
                let _ = write!(path, "{cmd}{:.2},{:.2}", sx(x), sy(y));
            }
            let _ = write!(out, r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="1.6"/>"#);
            if let Some(errors) = &s.errors {
                for (&(x, y), &e) in s.points.iter().zip(errors) {
                    if !usable(x, self.log_x) || e <= 0.0 {
                        continue;
                    }
                    let lo = if self.log_y { (y - e).max(y * 1e-3) } else { y - e };
                    if !usable(lo, self.log_y) {
                        continue;
                    }
                    let _ = write!(
                        out,
                        r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}" stroke-width="1.2"/>"#,
                        sx(x),
                        sy(y + e),
                        sy(lo)
                    );
                }
            }
            // markers only when the series is sparse
            if s.points.len() <= 64 {
                for &(x, y) in &s.points {
                    if usable(x, self.log_x) && usable(y, self.log_y) {
                        let _ = write!(
                            out,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                            sx(x),
                            sy(y)
                        );
                    }
                }
            }
            let _ = write!(
                out,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                ML + 12.0,
                MT + 22.0 + 20.0 * si as f64,
                esc(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn usable(v: f64, log: bool) -> bool {
    v.is_finite() && (!log || v > 0.0)
}

fn tr(v: f64, log: bool) -> f64 {
    if log {
        v.log10()
    } else {
        v
    }
}

fn axis_range(values: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if usable(v, log) {
            let t = tr(v, log);
            lo = lo.min(t);
            hi = hi.max(t);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = if log { 0.15 } else { 0.05 * (hi - lo) };
    (lo - pad, hi + pad)
}

/// Tick positions in transformed coordinates with their labels: decades on
/// log axes, a coarse "nice" grid otherwise.
fn ticks(lo: f64, hi: f64, log: bool) -> Vec<(f64, String)> {
    let mut out = Vec::new();
    if log {
        let step = (((hi - lo) / 8.0).ceil() as i64).max(1);
        let mut d = lo.ceil() as i64;
        while (d as f64) <= hi {
            out.push((d as f64, format!("1e{d}")));
            d += step;
        }
    } else {
        let raw = (hi - lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| (hi - lo) / s <= 7.0)
            .unwrap_or(mag * 10.0);
        let mut t = (lo / step).ceil() * step;
        while t <= hi {
            out.push((t, format!("{t:.4}")));
            t += step;
        }
    }
    out
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
