//! Minimal SVG line and histogram plots.

use std::fmt::Write;

use super::Histogram;
use crate::intensity::IntensityModel;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let (x1, y1) = (if x1 > x0 { x1 } else { x0 + 1.0 }, if y1 > y0 { y1 } else { y0 + 1.0 });
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }

    fn open(&self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
        let _ = writeln!(
            s,
            r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
        );
        for (v, anchor, x, y) in [(self.x0, "start", l, b + 16.0), (self.x1, "end", r, b + 16.0)] {
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{}</text>"#,
                fmt_tick(v)
            );
        }
        for (v, y) in [(self.y0, b), (self.y1, t)] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                l - 4.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 12.0,
            escape(xlabel)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(ylabel)
        );
        s
    }

    fn polyline(&self, pts: &[(f64, f64)], color: &str) -> String {
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            coords.join(" ")
        )
    }
}

fn fmt_tick(v: f64) -> String {
    format!("{:.3}", v)
}

/// `λ_θ(t)` on `[0, τ]`; exact since the intensity is piecewise linear
/// between baseline knots and ramp ends.
pub(super) fn intensity_plot(model: &IntensityModel, theta: f64, n: usize) -> String {
    let mut ts = model.breakpoints(&[theta]);
    ts.extend([0.0, model.tau()]);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let pts: Vec<(f64, f64)> = ts.iter().map(|&t| (t, model.rate(theta, t))).collect();
    let ymax = pts.iter().map(|p| p.1).fold(0.0, f64::max) * 1.1;
    let frame = Frame::new(0.0, model.tau(), 0.0, ymax);
    let mut s = frame.open(
        &format!("intensity at theta = {theta}, n = {n}, delta = {:.4e}", model.delta()),
        "t",
        "lambda(t)",
    );
    s.push_str(&frame.polyline(&pts, "steelblue"));
    let x = frame.px(theta);
    let _ = writeln!(
        s,
        r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="gray" stroke-dasharray="4 3"/>"#,
        MARGIN,
        H - MARGIN
    );
    s.push_str("</svg>\n");
    s
}

/// Reference drawn on top of a histogram.
pub(super) enum Overlay<'a> {
    Normal { variance: f64 },
    Sample(&'a [f64]),
    None,
}

pub(super) fn histogram_plot(title: &str, hist: &Histogram, total: usize, overlay: Overlay<'_>) -> String {
    let lo = hist.edges[0];
    let hi = *hist.edges.last().unwrap_or(&lo);
    let w = (hi - lo) / hist.counts.len().max(1) as f64;
    let dens: Vec<f64> = hist.counts.iter().map(|&c| c as f64 / (total as f64 * w)).collect();
    let curve: Vec<(f64, f64)> = match overlay {
        Overlay::Normal { variance } => (0..=200)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / 200.0;
                (
                    x,
                    (-0.5 * x * x / variance).exp() / (2.0 * std::f64::consts::PI * variance).sqrt(),
                )
            })
            .collect(),
        Overlay::Sample(ref_sample) => {
            let bins = hist.counts.len();
            let mut counts = vec![0usize; bins];
            for &x in ref_sample {
                if x >= lo && x <= hi {
                    counts[(((x - lo) / w) as usize).min(bins - 1)] += 1;
                }
            }
            counts
                .iter()
                .enumerate()
                .map(|(k, &c)| (lo + (k as f64 + 0.5) * w, c as f64 / (ref_sample.len() as f64 * w)))
                .collect()
        }
        Overlay::None => Vec::new(),
    };
    let ymax = dens
        .iter()
        .chain(curve.iter().map(|p| &p.1))
        .fold(0.0f64, |m, &v| m.max(v))
        * 1.1;
    let frame = Frame::new(lo, hi, 0.0, ymax);
    let mut s = frame.open(title, "normalized error", "density");
    for (k, &d) in dens.iter().enumerate() {
        let x0 = frame.px(lo + k as f64 * w);
        let x1 = frame.px(lo + (k + 1) as f64 * w);
        let y = frame.py(d);
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="white"/>"##,
            x1 - x0,
            frame.py(0.0) - y
        );
    }
    if !curve.is_empty() {
        s.push_str(&frame.polyline(&curve, "firebrick"));
    }
    s.push_str("</svg>\n");
    s
}
