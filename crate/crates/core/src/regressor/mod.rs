//! The windowed sequence regressor: FC1 per time step, a stacked LSTM over
//! the window, FC2 over the concatenated last-layer hidden and cell states,
//! and a scalar FC3 head.

pub(crate) mod net;
mod train;

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NormStats};
use crate::error::{Error, Result};
use crate::seed;

pub use train::{loss_trace_csv, lr_at, parse_loss_trace_csv, train, LossTrace, Schedule, TrainConfig};
pub(crate) use train::{run_training, Transfer, TransferPlan};

use net::{Layout, Trace};

/// Degrees per unit of the network's output scale.
pub const LABEL_SCALE_DEG: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorConfig {
    pub window: usize,
    pub fc1_out: usize,
    pub lstm_layers: usize,
    pub lstm_hidden: usize,
    pub fc2_out: usize,
    pub fc3_out: usize,
    pub input_dim: usize,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self { window: 6, fc1_out: 256, lstm_layers: 3, lstm_hidden: 256, fc2_out: 128, fc3_out: 1, input_dim: 2 }
    }
}

impl RegressorConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("window", self.window),
            ("fc1_out", self.fc1_out),
            ("lstm_layers", self.lstm_layers),
            ("lstm_hidden", self.lstm_hidden),
            ("fc2_out", self.fc2_out),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.fc3_out != 1 {
            return Err(Error::Config(format!("fc3_out must be 1 (single joint angle), got {}", self.fc3_out)));
        }
        if self.input_dim != 2 {
            return Err(Error::Config(format!("input_dim must be 2 (two sensor channels), got {}", self.input_dim)));
        }
        Ok(())
    }

    /// Number of weights and biases; matches the flat parameter layout.
    pub fn param_count(&self) -> usize {
        let h = self.lstm_hidden;
        let fc1 = self.fc1_out * self.input_dim + self.fc1_out;
        let lstm: usize = (0..self.lstm_layers)
            .map(|l| {
                let input = if l == 0 { self.fc1_out } else { h };
                4 * h * (input + h) + 4 * h
            })
            .sum();
        let fc2 = self.window * 2 * h * self.fc2_out + self.fc2_out;
        let fc3 = self.fc2_out * self.fc3_out + self.fc3_out;
        fc1 + lstm + fc2 + fc3
    }

    /// Dimension of the FC2 output, where the transfer losses act.
    pub fn feature_dim(&self) -> usize {
        self.fc2_out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel {
    pub config: RegressorConfig,
    pub params: Vec<f64>,
    pub norm: NormStats,
    pub label_scale: f64,
}

pub fn init_model(cfg: RegressorConfig, seed: u64) -> Result<RegressorModel> {
    cfg.validate()?;
    let layout = Layout::new(&cfg);
    let mut params = vec![0.0; layout.total];
    let mut rng = seed::stream(seed, "model/init");
    let mut fill = |params: &mut [f64], start: usize, len: usize, fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for p in &mut params[start..start + len] {
            *p = rng.random_range(-bound..bound);
        }
    };
    fill(&mut params, layout.fc1_w, cfg.fc1_out * cfg.input_dim, cfg.input_dim);
    let h = cfg.lstm_hidden;
    for off in &layout.lstm {
        let fan_in = h;
        fill(&mut params, off.w_ih, 4 * h * off.input, fan_in);
        fill(&mut params, off.w_hh, 4 * h * h, fan_in);
    }
    fill(&mut params, layout.fc2_w, cfg.fc2_out * layout.feat_dim(), layout.feat_dim());
    fill(&mut params, layout.fc3_w, cfg.fc2_out, cfg.fc2_out);
    Ok(RegressorModel { config: cfg, params, norm: NormStats::identity(), label_scale: LABEL_SCALE_DEG })
}

impl RegressorModel {
    pub fn zeros(cfg: RegressorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { params: vec![0.0; cfg.param_count()], config: cfg, norm: NormStats::identity(), label_scale: LABEL_SCALE_DEG })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    /// Predicted angle in degrees for one window of raw readings; `model.norm`
    /// is applied before the network.
    pub fn forward(&self, window: &[[f64; 2]]) -> Result<f64> {
        let layout = self.layout();
        let mut tr = Trace::new(&layout);
        self.forward_with(&layout, &mut tr, window)
    }

    fn forward_with(&self, layout: &Layout, tr: &mut Trace, window: &[[f64; 2]]) -> Result<f64> {
        if window.len() != self.config.window {
            return Err(Error::Shape { expected: format!("{}x2 window", self.config.window), got: format!("{}x2", window.len()) });
        }
        let mut x = Vec::with_capacity(2 * window.len());
        for (k, r) in window.iter().enumerate() {
            if !r[0].is_finite() || !r[1].is_finite() {
                return Err(Error::NonFiniteInput(format!("window row {k} is {r:?}")));
            }
            let u = self.norm.apply(*r);
            x.extend_from_slice(&u);
        }
        Ok(net::forward(&self.params, layout, &x, tr) * self.label_scale)
    }

    /// One prediction per frame. Frames before `W-1` see a window left-padded
    /// with copies of frame 0.
    pub fn predict_series(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if ds.is_empty() {
            return Err(Error::Empty("predict_series needs at least one frame".into()));
        }
        let layout = self.layout();
        let mut tr = Trace::new(&layout);
        let readings = ds.readings();
        let w = self.config.window;
        let mut window = vec![[0.0; 2]; w];
        let mut out = Vec::with_capacity(readings.len());
        for i in 0..readings.len() {
            for (k, slot) in window.iter_mut().enumerate() {
                let j = (i + k + 1).saturating_sub(w);
                *slot = readings[j];
            }
            out.push(self.forward_with(&layout, &mut tr, &window)?);
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        writeln!(s, "suda-model 1").unwrap();
        writeln!(s, "window {}", c.window).unwrap();
        writeln!(s, "fc1_out {}", c.fc1_out).unwrap();
        writeln!(s, "lstm_layers {}", c.lstm_layers).unwrap();
        writeln!(s, "lstm_hidden {}", c.lstm_hidden).unwrap();
        writeln!(s, "fc2_out {}", c.fc2_out).unwrap();
        writeln!(s, "fc3_out {}", c.fc3_out).unwrap();
        writeln!(s, "input_dim {}", c.input_dim).unwrap();
        writeln!(s, "norm_lo {:e} {:e}", self.norm.lo[0], self.norm.lo[1]).unwrap();
        writeln!(s, "norm_hi {:e} {:e}", self.norm.hi[0], self.norm.hi[1]).unwrap();
        writeln!(s, "label_scale {:e}", self.label_scale).unwrap();
        writeln!(s, "params {}", self.params.len()).unwrap();
        for p in &self.params {
            writeln!(s, "{p:e}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
            let (i, line) = lines.next().ok_or_else(|| Error::Format(format!("missing {what}")))?;
            Ok((i + 1, line.split_whitespace().collect()))
        };
        let (_, head) = next("header")?;
        if head != ["suda-model", "1"] {
            return Err(Error::Format(format!("unrecognised header {head:?}")));
        }
        let field = |(line, parts): (usize, Vec<&str>), key: &str, n: usize| -> Result<Vec<String>> {
            if parts.first() != Some(&key) || parts.len() != n + 1 {
                return Err(Error::Format(format!("line {line}: expected `{key}` with {n} value(s)")));
            }
            Ok(parts[1..].iter().map(|s| s.to_string()).collect())
        };
        let int = |v: &str, line: &str| -> Result<usize> { v.parse().map_err(|_| Error::Format(format!("{line}: bad integer {v:?}"))) };
        let float = |v: &str, ctx: &str| -> Result<f64> { v.parse().map_err(|_| Error::Format(format!("{ctx}: bad number {v:?}"))) };
        let mut cfg = RegressorConfig::default();
        for (key, slot) in [
            ("window", &mut cfg.window),
            ("fc1_out", &mut cfg.fc1_out),
            ("lstm_layers", &mut cfg.lstm_layers),
            ("lstm_hidden", &mut cfg.lstm_hidden),
            ("fc2_out", &mut cfg.fc2_out),
            ("fc3_out", &mut cfg.fc3_out),
            ("input_dim", &mut cfg.input_dim),
        ] {
            let v = field(next(key)?, key, 1)?;
            *slot = int(&v[0], key)?;
        }
        cfg.validate()?;
        let lo = field(next("norm_lo")?, "norm_lo", 2)?;
        let hi = field(next("norm_hi")?, "norm_hi", 2)?;
        let norm = NormStats {
            lo: [float(&lo[0], "norm_lo")?, float(&lo[1], "norm_lo")?],
            hi: [float(&hi[0], "norm_hi")?, float(&hi[1], "norm_hi")?],
        };
        let label_scale = float(&field(next("label_scale")?, "label_scale", 1)?[0], "label_scale")?;
        let count = int(&field(next("params")?, "params", 1)?[0], "params")?;
        if count != cfg.param_count() {
            return Err(Error::Format(format!("params {count} does not match config ({})", cfg.param_count())));
        }
        let mut params = Vec::with_capacity(count);
        for k in 0..count {
            let (line, parts) = next("parameter")?;
            if parts.len() != 1 {
                return Err(Error::Format(format!("line {line}: expected one parameter value")));
            }
            params.push(float(parts[0], &format!("parameter {k}"))?);
        }
        Ok(Self { config: cfg, params, norm, label_scale })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Mean absolute difference, in the units of the inputs.
pub fn loss_mae(preds: &[f64], labels: &[f64]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::Shape { expected: format!("{} predictions", labels.len()), got: preds.len().to_string() });
    }
    if preds.is_empty() {
        return Err(Error::Empty("MAE of zero pairs".into()));
    }
    let sum: f64 = preds.iter().zip(labels).map(|(p, y)| (y - p).abs()).sum();
    Ok(sum / preds.len() as f64)
}

/// Gradient of the batch-mean unit-scale MAE for raw windows and labels in degrees.
/// Exposed for gradient checks; training uses the same path.
pub fn batch_gradient(model: &RegressorModel, windows: &[Vec<[f64; 2]>], labels_deg: &[f64]) -> Result<Vec<f64>> {
    if windows.is_empty() || windows.len() != labels_deg.len() {
        return Err(Error::Shape { expected: "non-empty batch with one label per window".into(), got: format!("{} windows, {} labels", windows.len(), labels_deg.len()) });
    }
    let layout = model.layout();
    let mut tr = Trace::new(&layout);
    let mut scratch = net::Scratch::new(&layout);
    let mut grad = vec![0.0; layout.total];
    let inv_b = 1.0 / windows.len() as f64;
    for (w, &y) in windows.iter().zip(labels_deg) {
        let r = model.forward_with(&layout, &mut tr, w)? - y;
        let dy = if r > 0.0 { inv_b } else if r < 0.0 { -inv_b } else { 0.0 };
        net::backward(&model.params, &layout, &tr, dy, None, &mut grad, &mut scratch);
    }
    if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!("gradient component {k} is {}", grad[k])));
    }
    Ok(grad)
}

/// Batch-mean unit-scale MAE, the objective whose gradient [`batch_gradient`] returns.
pub fn batch_loss(model: &RegressorModel, windows: &[Vec<[f64; 2]>], labels_deg: &[f64]) -> Result<f64> {
    let mut preds = Vec::with_capacity(windows.len());
    for w in windows {
        preds.push(model.forward(w)?);
    }
    Ok(loss_mae(&preds, labels_deg)? / model.label_scale)
}

/// Worst agreement between [`batch_gradient`] and central differences of [`batch_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compare every analytic gradient component with a central difference of
/// step `eps`. Relative error is `|a − n| / max(|a|, |n|, floor)`, where the
/// floor keeps components that are zero up to rounding from dominating.
pub fn finite_difference_check(model: &RegressorModel, windows: &[Vec<[f64; 2]>], labels_deg: &[f64], eps: f64) -> Result<GradCheck> {
    const FLOOR: f64 = 1e-6;
    let analytic = batch_gradient(model, windows, labels_deg)?;
    let mut probe = model.clone();
    let mut worst = GradCheck { max_rel_err: 0.0, index: 0, analytic: 0.0, numeric: 0.0 };
    for k in 0..analytic.len() {
        let orig = probe.params[k];
        probe.params[k] = orig + eps;
        let up = batch_loss(&probe, windows, labels_deg)?;
        probe.params[k] = orig - eps;
        let down = batch_loss(&probe, windows, labels_deg)?;
        probe.params[k] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
        if rel > worst.max_rel_err {
            worst = GradCheck { max_rel_err: rel, index: k, analytic: a, numeric };
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests;
