//! Dependency-free SVG plots with fixed number formatting.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::regressor::LossTrace;
use crate::support::{EvidenceTable, RegistrationMap, SupportCurve};

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Most points drawn per scatter or line series; longer inputs are strided.
pub const MAX_POINTS: usize = 2000;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn stride<T: Copy>(v: &[T]) -> Vec<T> {
    let step = v.len().div_ceil(MAX_POINTS).max(1);
    v.iter().step_by(step).copied().collect()
}

/// Axis frame with data-to-pixel mapping.
struct Figure {
    x: (f64, f64),
    y: (f64, f64),
    body: String,
    legend: Vec<(String, &'static str)>,
    title: String,
    x_label: String,
    y_label: String,
}

impl Figure {
    fn new(title: &str, x_label: &str, y_label: &str, points: impl Iterator<Item = [f64; 2]>) -> Result<Self> {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            if !(p[0].is_finite() && p[1].is_finite()) {
                continue;
            }
            x = (x.0.min(p[0]), x.1.max(p[0]));
            y = (y.0.min(p[1]), y.1.max(p[1]));
        }
        if !x.0.is_finite() {
            return Err(Error::Empty(format!("nothing to plot in '{title}'")));
        }
        let pad = |r: (f64, f64)| {
            let span = r.1 - r.0;
            let m = if span > 0.0 { 0.04 * span } else { 1.0 };
            (r.0 - m, r.1 + m)
        };
        Ok(Self {
            x: pad(x),
            y: pad(y),
            body: String::new(),
            legend: Vec::new(),
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
        })
    }

    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        let u = (p[0] - self.x.0) / (self.x.1 - self.x.0);
        let v = (p[1] - self.y.0) / (self.y.1 - self.y.0);
        (LEFT + u * (W - LEFT - RIGHT), H - BOTTOM - v * (H - TOP - BOTTOM))
    }

    fn polyline(&mut self, pts: &[[f64; 2]], color: &'static str, width: f64, label: Option<&str>) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for p in stride(pts) {
            let (a, b) = self.px(p);
            write!(d, "{a:.2},{b:.2} ").unwrap();
        }
        writeln!(self.body, r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#, d.trim_end()).unwrap();
        if let Some(l) = label {
            self.legend.push((l.into(), color));
        }
    }

    fn scatter(&mut self, pts: &[[f64; 2]], color: &'static str, r: f64, label: Option<&str>) {
        writeln!(self.body, r#"<g fill="{color}" fill-opacity="0.35">"#).unwrap();
        for p in stride(pts) {
            let (a, b) = self.px(p);
            writeln!(self.body, r#"<circle cx="{a:.2}" cy="{b:.2}" r="{r}"/>"#).unwrap();
        }
        self.body.push_str("</g>\n");
        if let Some(l) = label {
            self.legend.push((l.into(), color));
        }
    }

    fn segment(&mut self, a: [f64; 2], b: [f64; 2], color: &'static str, class: &str) {
        let (x1, y1) = self.px(a);
        let (x2, y2) = self.px(b);
        writeln!(self.body, r#"<line class="{class}" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{color}" stroke-width="0.8"/>"#).unwrap();
    }

    fn ticks(r: (f64, f64)) -> Vec<f64> {
        let span = r.1 - r.0;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let mut t = (r.0 / step).ceil() * step;
        let mut out = Vec::new();
        while t <= r.1 + 1e-9 * span {
            out.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
            t += step;
        }
        out
    }

    fn finish(self) -> String {
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
        writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, esc(&self.title)).unwrap();
        let (x0, y0) = (LEFT, H - BOTTOM);
        writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, W - LEFT - RIGHT, H - TOP - BOTTOM).unwrap();
        for t in Self::ticks(self.x) {
            let (a, _) = self.px([t, self.y.0]);
            writeln!(s, r#"<line x1="{a:.2}" y1="{y0:.2}" x2="{a:.2}" y2="{:.2}" stroke="black"/><text x="{a:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 5.0, y0 + 18.0, fmt_tick(t)).unwrap();
        }
        for t in Self::ticks(self.y) {
            let (_, b) = self.px([self.x.0, t]);
            writeln!(s, r#"<line x1="{:.2}" y1="{b:.2}" x2="{x0:.2}" y2="{b:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 5.0, x0 - 8.0, b + 4.0, fmt_tick(t)).unwrap();
        }
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + (W - LEFT - RIGHT) / 2.0, H - 14.0, esc(&self.x_label)).unwrap();
        writeln!(s, r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#, TOP + (H - TOP - BOTTOM) / 2.0, esc(&self.y_label)).unwrap();
        s.push_str(&self.body);
        for (i, (label, color)) in self.legend.iter().enumerate() {
            let y = TOP + 16.0 + 16.0 * i as f64;
            writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#, W - RIGHT - 170.0, y - 10.0, W - RIGHT - 152.0, y, esc(label)).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Raw readings of both domains with their fitted support curves.
pub fn support_overlay(curve_s: &SupportCurve, pts_s: &[[f64; 2]], curve_t: &SupportCurve, pts_t: &[[f64; 2]]) -> Result<String> {
    let raw_vertices = |c: &SupportCurve| -> Vec<[f64; 2]> { c.vertices().iter().map(|&v| c.norm.invert(v)).collect() };
    let (vs, vt) = (raw_vertices(curve_s), raw_vertices(curve_t));
    let all = pts_s.iter().chain(pts_t).chain(&vs).chain(&vt).copied();
    let mut f = Figure::new("Support curves", "channel 1 reading", "channel 2 reading", all)?;
    f.scatter(pts_s, PALETTE[0], 1.2, Some("source readings"));
    f.scatter(pts_t, PALETTE[1], 1.2, Some("target readings"));
    f.polyline(&vs, PALETTE[0], 2.0, Some("source support"));
    f.polyline(&vt, PALETTE[1], 2.0, Some("target support"));
    Ok(f.finish())
}

/// Source and target proxies with one `correspondence` segment per index.
pub fn registration_lines(map: &RegistrationMap) -> Result<String> {
    let pairs = map.correspondences();
    let all = pairs.iter().flat_map(|(a, b)| [*a, *b]);
    let mut f = Figure::new("Support registration", "channel 1 reading", "channel 2 reading", all)?;
    for (a, b) in &pairs {
        f.segment(*a, *b, "#999999", "correspondence");
    }
    let (s, t): (Vec<[f64; 2]>, Vec<[f64; 2]>) = pairs.into_iter().unzip();
    f.scatter(&s, PALETTE[0], 2.0, Some("source proxies"));
    f.scatter(&t, PALETTE[1], 2.0, Some("target proxies"));
    Ok(f.finish())
}

/// Mean label per curve-parameter bin for both domains.
pub fn evidence_curves(table: &EvidenceTable) -> Result<String> {
    let series = |pick: fn(&crate::support::EvidenceRow) -> Option<f64>| -> Vec<[f64; 2]> {
        table.rows.iter().filter_map(|r| pick(r).map(|m| [0.5 * (r.l_lo + r.l_hi), m])).collect()
    };
    let s = series(|r| r.source_mean);
    let t = series(|r| r.target_mean);
    let mut f = Figure::new("Label along the support", "curve parameter l", "mean angle (deg)", s.iter().chain(&t).copied())?;
    f.polyline(&s, PALETTE[0], 2.0, Some("source"));
    f.polyline(&t, PALETTE[1], 2.0, Some("target"));
    f.scatter(&s, PALETTE[0], 2.5, None);
    f.scatter(&t, PALETTE[1], 2.5, None);
    Ok(f.finish())
}

/// Predicted and, when given, true angles over frames.
pub fn prediction_trace(preds: &[f64], labels: Option<&[f64]>) -> Result<String> {
    if let Some(l) = labels {
        if l.len() != preds.len() {
            return Err(Error::Shape { expected: format!("{} labels", preds.len()), got: l.len().to_string() });
        }
    }
    let p: Vec<[f64; 2]> = preds.iter().enumerate().map(|(i, &v)| [i as f64, v]).collect();
    let l: Vec<[f64; 2]> = labels.unwrap_or(&[]).iter().enumerate().map(|(i, &v)| [i as f64, v]).collect();
    let mut f = Figure::new("Prediction trace", "frame", "angle (deg)", p.iter().chain(&l).copied())?;
    if !l.is_empty() {
        f.polyline(&l, "#444444", 1.5, Some("ground truth"));
    }
    f.polyline(&p, PALETTE[1], 1.2, Some("prediction"));
    Ok(f.finish())
}

/// Supervised and transfer losses per epoch for one or more runs.
pub fn loss_trace(runs: &[(&str, &LossTrace)]) -> Result<String> {
    let mut all = Vec::new();
    let mut series = Vec::new();
    for (name, tr) in runs {
        let sup: Vec<[f64; 2]> = tr.supervised.iter().enumerate().map(|(e, &v)| [(e + 1) as f64, v]).collect();
        let tl: Vec<[f64; 2]> = tr.transfer.iter().enumerate().map(|(e, &v)| [(e + 1) as f64, v]).collect();
        all.extend(sup.iter().chain(&tl).copied());
        series.push((name.to_string(), sup, tl));
    }
    let mut f = Figure::new("Training loss", "epoch", "loss (supervised: deg MAE)", all.into_iter())?;
    for (i, (name, sup, tl)) in series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        f.polyline(sup, c, 2.0, Some(&format!("{name} supervised")));
        if !tl.is_empty() {
            f.polyline(tl, c, 1.0, Some(&format!("{name} transfer")));
        }
    }
    Ok(f.finish())
}
