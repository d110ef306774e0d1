//! Support curves of two-channel sensor clouds and quantized support
//! registration.
//!
//! A support curve is a polyline through bin medians of the normalized cloud,
//! parameterized by normalized arc length `l ∈ [0, 1]` and quantized into
//! `n + 1` equally spaced proxy points. Registration sends a source sample to
//! the index of its nearest source proxy and returns the target proxy with
//! the same index.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{Dataset, DatasetMeta, DomainTag, NormStats, SensorFrame};
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 100;
pub const DEFAULT_PROXIES: usize = 100;
const LO_PCT: f64 = 1.0;
const HI_PCT: f64 = 99.0;

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportCurve {
    pub norm: NormStats,
    vertices: Vec<[f64; 2]>,
    cum_len: Vec<f64>,
    n: usize,
    proxies: Vec<[f64; 2]>,
}

/// Projection of a point onto a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub l: f64,
    /// Euclidean distance to the curve in normalized units.
    pub distance: f64,
}

impl SupportCurve {
    /// Build a curve from polyline vertices in normalized space.
    ///
    /// Consecutive duplicate vertices are merged and the direction is fixed so
    /// that channel 1 is larger at `l = 1` than at `l = 0`.
    pub fn from_vertices(norm: NormStats, vertices: Vec<[f64; 2]>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("proxy count must be at least 1".into()));
        }
        let mut vs: Vec<[f64; 2]> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(Error::NonFiniteInput("support vertex".into()));
            }
            if vs.last().is_none_or(|&last| dist2(last, v).sqrt() >= 1e-12) {
                vs.push(v);
            }
        }
        if vs.len() < 2 {
            return Err(Error::InsufficientData("support needs at least two distinct vertices".into()));
        }
        let (first, last) = (vs[0], vs[vs.len() - 1]);
        if last[0] < first[0] || (last[0] == first[0] && last[1] < first[1]) {
            vs.reverse();
        }
        let mut cum_len = Vec::with_capacity(vs.len());
        cum_len.push(0.0);
        for w in vs.windows(2) {
            let next = cum_len[cum_len.len() - 1] + dist2(w[0], w[1]).sqrt();
            cum_len.push(next);
        }
        let total = cum_len[cum_len.len() - 1];
        if total < 1e-9 {
            return Err(Error::DegenerateSupport(total));
        }
        let mut curve = Self { norm, vertices: vs, cum_len, n, proxies: Vec::new() };
        curve.proxies = (0..=n).map(|i| curve.point_at(i as f64 / n as f64)).collect();
        Ok(curve)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cum_len(&self) -> &[f64] {
        &self.cum_len
    }

    pub fn total_len(&self) -> f64 {
        self.cum_len[self.cum_len.len() - 1]
    }

    /// Number of proxy segments; there are `n + 1` proxies.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Proxies in normalized space.
    pub fn proxies(&self) -> &[[f64; 2]] {
        &self.proxies
    }

    /// Proxy `i` in raw reading units.
    pub fn proxy_raw(&self, i: usize) -> [f64; 2] {
        self.norm.invert(self.proxies[i])
    }

    /// Point at normalized arc length `l` (clamped to [0, 1]), normalized space.
    pub fn point_at(&self, l: f64) -> [f64; 2] {
        let s = l.clamp(0.0, 1.0) * self.total_len();
        // Last segment whose start is <= s.
        let j = self.cum_len.partition_point(|&c| c <= s).clamp(1, self.vertices.len() - 1) - 1;
        let seg = self.cum_len[j + 1] - self.cum_len[j];
        let t = ((s - self.cum_len[j]) / seg).clamp(0.0, 1.0);
        let (a, b) = (self.vertices[j], self.vertices[j + 1]);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    /// Project a point given in normalized units.
    pub fn project_normalized(&self, p: [f64; 2]) -> Projection {
        let mut best = (f64::INFINITY, 0usize, 0.0f64);
        for (j, w) in self.vertices.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
            let q = [a[0] + t * d[0], a[1] + t * d[1]];
            let d2 = dist2(p, q);
            if d2 < best.0 {
                best = (d2, j, t);
            }
        }
        let (d2, j, t) = best;
        let s = self.cum_len[j] + t * (self.cum_len[j + 1] - self.cum_len[j]);
        Projection { l: s / self.total_len(), distance: d2.sqrt() }
    }

    /// Curve parameter of a raw reading pair.
    pub fn project(&self, x: [f64; 2]) -> Projection {
        self.project_normalized(self.norm.apply(x))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# support curve: normalized-space polyline and proxies\nversion 1\n");
        let _ = writeln!(s, "proxies {}", self.n);
        let _ = writeln!(s, "norm_lo {} {}", self.norm.lo[0], self.norm.lo[1]);
        let _ = writeln!(s, "norm_hi {} {}", self.norm.hi[0], self.norm.hi[1]);
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{} {}", v[0], v[1]);
        }
        let _ = writeln!(s, "proxy_points {}", self.proxies.len());
        for p in &self.proxies {
            let _ = writeln!(s, "{} {}", p[0], p[1]);
        }
        s
    }

    /// Parse [`Self::to_text`] output. Proxies are recomputed from the vertices.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("support curve: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
        let mut field = |key: &str| -> Result<Vec<f64>> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing '{key}'")))?;
            let mut it = line.split_whitespace();
            if key.is_empty() {
                return it.map(|t| t.parse().map_err(|_| bad(&format!("bad number '{t}'")))).collect();
            }
            if it.next() != Some(key) {
                return Err(bad(&format!("expected '{key}', found '{line}'")));
            }
            it.map(|t| t.parse().map_err(|_| bad(&format!("bad number '{t}'")))).collect()
        };
        if field("version")? != [1.0] {
            return Err(bad("unsupported version"));
        }
        let n = field("proxies")?.first().copied().ok_or_else(|| bad("proxies"))? as usize;
        let lo = field("norm_lo")?;
        let hi = field("norm_hi")?;
        if lo.len() != 2 || hi.len() != 2 {
            return Err(bad("norm rows need two values"));
        }
        let count = field("vertices")?.first().copied().ok_or_else(|| bad("vertices"))? as usize;
        let mut vertices = Vec::with_capacity(count);
        for _ in 0..count {
            let v = field("")?;
            if v.len() != 2 {
                return Err(bad("vertex rows need two values"));
            }
            vertices.push([v[0], v[1]]);
        }
        let norm = NormStats { lo: [lo[0], lo[1]], hi: [hi[0], hi[1]] };
        Self::from_vertices(norm, vertices, n)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Fit a support curve to raw reading pairs.
///
/// Points are normalized (1st/99th percentiles), ordered along the first
/// principal direction, split into `bins` equal-count bins, and each bin
/// contributes its component-wise median as a vertex.
pub fn fit_support_points(points: &[[f64; 2]], bins: usize, n: usize) -> Result<SupportCurve> {
    if bins < 2 || n < 1 {
        return Err(Error::Argument(format!("need bins >= 2 and proxies >= 1, got {bins} and {n}")));
    }
    let need = (2 * bins).max(50);
    if points.len() < need {
        return Err(Error::InsufficientData(format!("{} points, need at least {need}", points.len())));
    }
    let norm = match NormStats::fit_points(points, LO_PCT, HI_PCT) {
        Ok(n) => n,
        Err(Error::DegenerateScale { .. }) => return Err(Error::DegenerateSupport(0.0)),
        Err(e) => return Err(e),
    };
    let mut pts: Vec<[f64; 2]> = points.iter().map(|&p| norm.apply(p)).collect();
    // Canonical order first, so the result does not depend on input order.
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));

    let count = pts.len() as f64;
    let mean = pts.iter().fold([0.0; 2], |m, p| [m[0] + p[0], m[1] + p[1]]);
    let mean = [mean[0] / count, mean[1] / count];
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in &pts {
        let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let dir = [angle.cos(), angle.sin()];

    let mut keyed: Vec<(f64, [f64; 2])> = pts.iter().map(|&p| (p[0] * dir[0] + p[1] * dir[1], p)).collect();
    keyed.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1[0].total_cmp(&b.1[0]))
            .then(a.1[1].total_cmp(&b.1[1]))
    });

    let total = keyed.len();
    let mut vertices = Vec::with_capacity(bins);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for b in 0..bins {
        let (start, end) = (b * total / bins, (b + 1) * total / bins);
        if start == end {
            continue;
        }
        xs.clear();
        ys.clear();
        xs.extend(keyed[start..end].iter().map(|k| k.1[0]));
        ys.extend(keyed[start..end].iter().map(|k| k.1[1]));
        vertices.push([median(&mut xs), median(&mut ys)]);
    }
    if vertices.len() < 2 {
        return Err(Error::InsufficientData("fewer than two non-empty bins".into()));
    }
    SupportCurve::from_vertices(norm, vertices, n)
}

pub fn fit_support(ds: &Dataset, bins: usize, n: usize) -> Result<SupportCurve> {
    fit_support_points(&ds.readings(), bins, n)
}

pub fn param_of(curve: &SupportCurve, x: [f64; 2]) -> Projection {
    curve.project(x)
}

/// Index of the proxy nearest `p` by exhaustive scan (ties → smaller index).
pub fn nearest_proxy_scan(proxies: &[[f64; 2]], p: [f64; 2]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, &q) in proxies.iter().enumerate() {
        let d = dist2(p, q);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Proxies sorted by channel-1 coordinate for pruned nearest-neighbour search.
#[derive(Debug, Clone, PartialEq)]
struct ProxyIndex {
    sorted: Vec<([f64; 2], usize)>,
}

impl ProxyIndex {
    fn new(proxies: &[[f64; 2]]) -> Self {
        let mut sorted: Vec<_> = proxies.iter().copied().zip(0..).collect();
        sorted.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]).then(a.1.cmp(&b.1)));
        Self { sorted }
    }

    fn nearest(&self, p: [f64; 2]) -> usize {
        let start = self.sorted.partition_point(|e| e.0[0] < p[0]);
        let mut best = (f64::INFINITY, usize::MAX);
        let consider = |q: [f64; 2], i: usize, best: &mut (f64, usize)| {
            let d = dist2(p, q);
            if d < best.0 || (d == best.0 && i < best.1) {
                *best = (d, i);
            }
        };
        // Walk outwards; stop once the channel-1 gap alone exceeds the best distance.
        for &(q, i) in &self.sorted[start..] {
            let dx = q[0] - p[0];
            if dx * dx > best.0 {
                break;
            }
            consider(q, i, &mut best);
        }
        for &(q, i) in self.sorted[..start].iter().rev() {
            let dx = q[0] - p[0];
            if dx * dx > best.0 {
                break;
            }
            consider(q, i, &mut best);
        }
        best.1
    }
}

/// Paired source and target curves with a shared proxy count.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationMap {
    pub source: SupportCurve,
    pub target: SupportCurve,
    index: ProxyIndex,
}

impl RegistrationMap {
    pub fn new(source: SupportCurve, target: SupportCurve) -> Result<Self> {
        if source.n != target.n {
            return Err(Error::Argument(format!(
                "source has {} proxy segments, target has {}",
                source.n, target.n
            )));
        }
        let index = ProxyIndex::new(&source.proxies);
        Ok(Self { source, target, index })
    }

    pub fn n(&self) -> usize {
        self.source.n
    }

    /// Index of the source proxy nearest the raw source reading `x_s`.
    pub fn proxy_index(&self, x_s: [f64; 2]) -> usize {
        self.index.nearest(self.source.norm.apply(x_s))
    }

    /// Registered target-domain reading for a raw source reading.
    pub fn register(&self, x_s: [f64; 2]) -> [f64; 2] {
        self.target.proxy_raw(self.proxy_index(x_s))
    }

    /// (source proxy, target proxy) pairs in raw units.
    pub fn correspondences(&self) -> Vec<([f64; 2], [f64; 2])> {
        (0..=self.n())
            .map(|i| (self.source.proxy_raw(i), self.target.proxy_raw(i)))
            .collect()
    }
}

pub fn register(map: &RegistrationMap, x_s: [f64; 2]) -> [f64; 2] {
    map.register(x_s)
}

/// Source labels attached to registered target-space readings, frame for frame.
pub fn build_pseudo_dataset(source: &Dataset, map: &RegistrationMap) -> Result<Dataset> {
    let labels = source.require_labels("build_pseudo_dataset")?;
    let frames = source
        .frames()
        .iter()
        .map(|f| SensorFrame { t: f.t, r: map.register(f.r) })
        .collect();
    let meta = DatasetMeta::new(DomainTag::Target, format!("{}|pseudo-labeled(n={})", source.meta.provenance, map.n()));
    Dataset::from_parts(frames, labels.to_vec(), meta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceRow {
    pub l_lo: f64,
    pub l_hi: f64,
    pub source_mean: Option<f64>,
    pub source_count: usize,
    pub target_mean: Option<f64>,
    pub target_count: usize,
}

/// Mean label per equal-width bin of the curve parameter, for both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceTable {
    pub rows: Vec<EvidenceRow>,
}

impl EvidenceTable {
    /// Largest |source mean − target mean| over bins populated on both sides.
    pub fn max_gap(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| Some((r.source_mean? - r.target_mean?).abs()))
            .fold(0.0, f64::max)
    }

    /// Mean signed gap (target − source) over bins populated on both sides.
    pub fn mean_gap(&self) -> f64 {
        let gaps: Vec<f64> = self
            .rows
            .iter()
            .filter_map(|r| Some(r.target_mean? - r.source_mean?))
            .collect();
        gaps.iter().sum::<f64>() / gaps.len().max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,l_lo,l_hi,source_mean,source_count,target_mean,target_count\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{},{},{},{},{},{}",
                r.l_lo,
                r.l_hi,
                opt(r.source_mean),
                r.source_count,
                opt(r.target_mean),
                r.target_count
            );
        }
        s
    }
}

fn bin_means(curve: &SupportCurve, ds: &Dataset, k: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    let labels = ds.require_labels("support_evidence")?;
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (f, &y) in ds.frames().iter().zip(labels) {
        let l = curve.project(f.r).l;
        let b = ((l * k as f64).floor() as usize).min(k - 1);
        sums[b] += y;
        counts[b] += 1;
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::Coverage(format!("no frames of '{}' fall in any bin", ds.meta.provenance)));
    }
    Ok((sums, counts))
}

pub fn support_evidence(curve_s: &SupportCurve, ds_s: &Dataset, curve_t: &SupportCurve, ds_t: &Dataset, k: usize) -> Result<EvidenceTable> {
    if k == 0 {
        return Err(Error::Argument("evidence needs at least one bin".into()));
    }
    let (ss, cs) = bin_means(curve_s, ds_s, k)?;
    let (st, ct) = bin_means(curve_t, ds_t, k)?;
    let mean = |s: f64, c: usize| (c > 0).then(|| s / c as f64);
    let rows = (0..k)
        .map(|b| EvidenceRow {
            l_lo: b as f64 / k as f64,
            l_hi: (b + 1) as f64 / k as f64,
            source_mean: mean(ss[b], cs[b]),
            source_count: cs[b],
            target_mean: mean(st[b], ct[b]),
            target_count: ct[b],
        })
        .collect();
    Ok(EvidenceTable { rows })
}
