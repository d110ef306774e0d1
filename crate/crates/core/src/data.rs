//! Sensor datasets: two digitized stretch readings per frame, optionally
//! paired with a ground-truth joint angle.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Upper end of the sensor digitization range.
pub const READING_MAX: f64 = 1023.0;
/// Nominal acquisition rate of the sensor hardware.
pub const SAMPLE_RATE_HZ: f64 = 50.0;

/// One time step of the two sensor readings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame {
    pub t: i64,
    pub r: [f64; 2],
}

/// A sensor frame with its joint bending angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledFrame {
    pub frame: SensorFrame,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainTag {
    Source,
    Target,
    TargetEval,
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainTag::Source => "source",
            DomainTag::Target => "target",
            DomainTag::TargetEval => "target-eval",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub domain: DomainTag,
    pub provenance: String,
    pub sample_rate_hz: f64,
}

impl DatasetMeta {
    pub fn new(domain: DomainTag, provenance: impl Into<String>) -> Self {
        Self {
            domain,
            provenance: provenance.into(),
            sample_rate_hz: SAMPLE_RATE_HZ,
        }
    }
}

/// An ordered, homogeneous collection of frames.
///
/// Labels are stored alongside the frames rather than per frame, so a
/// dataset is either fully labeled or not labeled at all.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    frames: Vec<SensorFrame>,
    labels: Option<Vec<f64>>,
    pub meta: DatasetMeta,
}

fn check_frames(frames: &[SensorFrame]) -> Result<()> {
    for (row, f) in frames.iter().enumerate() {
        for (k, &v) in f.r.iter().enumerate() {
            if !v.is_finite() || !(0.0..=READING_MAX).contains(&v) {
                return Err(Error::Argument(format!(
                    "frame {} reading r{} = {v} outside [0, {READING_MAX}]",
                    f.t,
                    k + 1
                )));
            }
        }
        if row > 0 && f.t <= frames[row - 1].t {
            return Err(Error::Ordering {
                row,
                frame: f.t,
                prev: frames[row - 1].t,
            });
        }
    }
    Ok(())
}

fn check_angle(t: i64, a: f64) -> Result<()> {
    if !a.is_finite() || !(0.0..=180.0).contains(&a) {
        return Err(Error::Argument(format!(
            "frame {t}: angle {a} outside [0, 180] degrees"
        )));
    }
    Ok(())
}

impl Dataset {
    pub fn unlabeled(frames: Vec<SensorFrame>, meta: DatasetMeta) -> Result<Self> {
        check_frames(&frames)?;
        Ok(Self {
            frames,
            labels: None,
            meta,
        })
    }

    pub fn labeled(frames: Vec<LabeledFrame>, meta: DatasetMeta) -> Result<Self> {
        let (frames, labels): (Vec<_>, Vec<_>) =
            frames.into_iter().map(|f| (f.frame, f.angle_deg)).unzip();
        Self::from_parts(frames, labels, meta)
    }

    /// Labeled dataset from parallel frame and label vectors.
    pub fn from_parts(frames: Vec<SensorFrame>, labels: Vec<f64>, meta: DatasetMeta) -> Result<Self> {
        if frames.len() != labels.len() {
            return Err(Error::Shape {
                expected: format!("{} labels", frames.len()),
                got: labels.len().to_string(),
            });
        }
        check_frames(&frames)?;
        for (f, &a) in frames.iter().zip(&labels) {
            check_angle(f.t, a)?;
        }
        Ok(Self {
            frames,
            labels: Some(labels),
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn frames(&self) -> &[SensorFrame] {
        &self.frames
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// Labels, or [`Error::LabelsRequired`] naming the calling context.
    pub fn require_labels(&self, context: &str) -> Result<&[f64]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::LabelsRequired(format!("{context}: dataset '{}' is unlabeled", self.meta.provenance)))
    }

    pub fn readings(&self) -> Vec<[f64; 2]> {
        self.frames.iter().map(|f| f.r).collect()
    }

    pub fn get_labeled(&self, i: usize) -> Option<LabeledFrame> {
        let labels = self.labels.as_ref()?;
        Some(LabeledFrame {
            frame: *self.frames.get(i)?,
            angle_deg: labels[i],
        })
    }

    /// First `n` frames (or all of them when shorter).
    pub fn truncated(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            frames: self.frames[..n].to_vec(),
            labels: self.labels.as_ref().map(|l| l[..n].to_vec()),
            meta: DatasetMeta {
                provenance: format!("{}|first-{n}", self.meta.provenance),
                ..self.meta.clone()
            },
        }
    }

    fn slice(&self, range: std::ops::Range<usize>, tag: &str) -> Dataset {
        Dataset {
            frames: self.frames[range.clone()].to_vec(),
            labels: self.labels.as_ref().map(|l| l[range].to_vec()),
            meta: DatasetMeta {
                provenance: format!("{}|{tag}", self.meta.provenance),
                ..self.meta.clone()
            },
        }
    }

    pub fn with_domain(mut self, domain: DomainTag) -> Dataset {
        self.meta.domain = domain;
        self
    }
}

/// Result of reading a CSV: the dataset plus how many cells were clamped.
#[derive(Debug)]
pub struct CsvLoad {
    pub dataset: Dataset,
    pub clamped: usize,
}

const HEADER_UNLABELED: [&str; 3] = ["frame", "r1", "r2"];
const HEADER_LABELED: [&str; 4] = ["frame", "r1", "r2", "angle_deg"];

fn parse_cell<T: std::str::FromStr>(cell: &str, row: usize, column: &str) -> Result<T> {
    cell.trim().parse().map_err(|_| Error::Parse {
        row,
        msg: format!("column '{column}': cannot parse '{cell}'"),
    })
}

/// Read a `frame,r1,r2[,angle_deg]` CSV. With `labeled = false`, an angle
/// column is accepted and discarded.
pub fn read_csv<R: Read>(reader: R, labeled: bool, provenance: &str) -> Result<CsvLoad> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let has_angle = if header == HEADER_LABELED {
        true
    } else if header == HEADER_UNLABELED {
        false
    } else {
        return Err(Error::Schema(format!(
            "header '{}' is neither 'frame,r1,r2' nor 'frame,r1,r2,angle_deg'",
            header.join(",")
        )));
    };
    if labeled && !has_angle {
        return Err(Error::Schema("labeled load requested but the file has no angle_deg column".into()));
    }
    let width = header.len();
    let mut frames = Vec::new();
    let mut labels = Vec::new();
    let mut clamped = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        // Data rows are numbered from 1, the header being row 0.
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if rec.len() != width {
            return Err(Error::Schema(format!("row {row} has {} columns, expected {width}", rec.len())));
        }
        let t: i64 = parse_cell(&rec[0], row, "frame")?;
        let mut r = [0.0; 2];
        for k in 0..2 {
            let v: f64 = parse_cell(&rec[k + 1], row, HEADER_UNLABELED[k + 1])?;
            if !v.is_finite() {
                return Err(Error::Parse { row, msg: format!("non-finite reading '{}'", &rec[k + 1]) });
            }
            let c = v.clamp(0.0, READING_MAX);
            if c != v {
                log::warn!("row {row}: r{} = {v} clamped to {c}", k + 1);
                clamped += 1;
            }
            r[k] = c;
        }
        if let Some(prev) = frames.last().map(|f: &SensorFrame| f.t) {
            if t <= prev {
                return Err(Error::Ordering { row, frame: t, prev });
            }
        }
        frames.push(SensorFrame { t, r });
        if has_angle {
            labels.push(parse_cell::<f64>(&rec[3], row, "angle_deg")?);
        }
    }
    let domain = if labeled { DomainTag::Source } else { DomainTag::Target };
    let meta = DatasetMeta::new(domain, provenance);
    let dataset = if labeled {
        Dataset::from_parts(frames, labels, meta)?
    } else {
        Dataset::unlabeled(frames, meta)?
    };
    Ok(CsvLoad { dataset, clamped })
}

pub fn load_csv(path: impl AsRef<Path>, labeled: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(read_csv(file, labeled, &path.display().to_string())?.dataset)
}

pub fn write_csv<W: Write>(ds: &Dataset, mut out: W) -> std::io::Result<()> {
    match ds.labels() {
        Some(labels) => {
            writeln!(out, "{}", HEADER_LABELED.join(","))?;
            for (f, a) in ds.frames().iter().zip(labels) {
                writeln!(out, "{},{},{},{}", f.t, f.r[0], f.r[1], a)?;
            }
        }
        None => {
            writeln!(out, "{}", HEADER_UNLABELED.join(","))?;
            for f in ds.frames() {
                writeln!(out, "{},{},{}", f.t, f.r[0], f.r[1])?;
            }
        }
    }
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_csv(ds, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Split chronologically: the first ⌈ratio·N⌉ frames train, the rest test.
pub fn split_chrono(ds: &Dataset, ratio: f64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Argument(format!("split ratio {ratio} not in (0, 1)")));
    }
    if ds.is_empty() {
        return Err(Error::Empty("cannot split an empty dataset".into()));
    }
    let n = ds.len();
    // The tolerance keeps products like 0.7 * 10 from rounding up past an integer.
    let n_train = ((ratio * n as f64) - 1e-9).ceil().max(1.0) as usize;
    if n_train >= n {
        return Err(Error::InsufficientData(format!(
            "split of {n} frames at ratio {ratio} leaves the test set empty"
        )));
    }
    Ok((ds.slice(0..n_train, "train"), ds.slice(n_train..n, "test")))
}

/// Unlabeled copy of a labeled dataset.
pub fn strip_labels(ds: &Dataset) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::Empty("cannot strip labels of an empty dataset".into()));
    }
    if !ds.is_labeled() {
        log::warn!("strip_labels: dataset '{}' is already unlabeled", ds.meta.provenance);
        return Ok(ds.clone());
    }
    Ok(Dataset {
        frames: ds.frames.clone(),
        labels: None,
        meta: DatasetMeta {
            provenance: format!("{}|labels-stripped", ds.meta.provenance),
            ..ds.meta.clone()
        },
    })
}

/// Per-channel affine map sending two percentiles of the fitted data to 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

/// Linear-interpolation percentile (the usual "linear" definition on order
/// statistics). `values` is reordered in place.
pub(crate) fn percentile_in_place(values: &mut [f64], pct: f64) -> f64 {
    let n = values.len();
    let pos = pct / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    let (_, &mut a, right) = values.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || hi == lo {
        return a;
    }
    // The next order statistic is the minimum of everything right of `lo`.
    let b = right.iter().copied().fold(f64::INFINITY, f64::min);
    a + frac * (b - a)
}

impl NormStats {
    pub fn identity() -> Self {
        Self { lo: [0.0; 2], hi: [1.0; 2] }
    }

    pub fn fit_points(points: &[[f64; 2]], lo_pct: f64, hi_pct: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct >= hi_pct {
            return Err(Error::Argument(format!("percentiles ({lo_pct}, {hi_pct}) must satisfy 0 <= lo < hi <= 100")));
        }
        if points.is_empty() {
            return Err(Error::Empty("cannot fit normalization on no points".into()));
        }
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for k in 0..2 {
            let mut col: Vec<f64> = points.iter().map(|p| p[k]).collect();
            lo[k] = percentile_in_place(&mut col, lo_pct);
            hi[k] = percentile_in_place(&mut col, hi_pct);
            if !(hi[k] - lo[k]).is_finite() || hi[k] - lo[k] <= 0.0 {
                return Err(Error::DegenerateScale { channel: k + 1, value: lo[k] });
            }
        }
        Ok(Self { lo, hi })
    }

    #[inline]
    pub fn apply(&self, r: [f64; 2]) -> [f64; 2] {
        [
            (r[0] - self.lo[0]) / (self.hi[0] - self.lo[0]),
            (r[1] - self.lo[1]) / (self.hi[1] - self.lo[1]),
        ]
    }

    #[inline]
    pub fn invert(&self, u: [f64; 2]) -> [f64; 2] {
        [
            self.lo[0] + u[0] * (self.hi[0] - self.lo[0]),
            self.lo[1] + u[1] * (self.hi[1] - self.lo[1]),
        ]
    }
}

pub fn normalize_fit(ds: &Dataset, lo_pct: f64, hi_pct: f64) -> Result<NormStats> {
    NormStats::fit_points(&ds.readings(), lo_pct, hi_pct)
}

pub fn normalize_apply(stats: &NormStats, readings: &[[f64; 2]]) -> Vec<[f64; 2]> {
    readings.iter().map(|&r| stats.apply(r)).collect()
}
