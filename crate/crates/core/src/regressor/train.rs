use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::net::{self, Layout, Scratch, Trace};
use super::RegressorModel;
use crate::data::{normalize_fit, Dataset};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// `lr0 · (1 + γ·iter)^(−decay)`
    InverseDecay,
    /// `lr0 · decay^(γ·iter)`
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch: usize,
    pub epochs: usize,
    pub sched_gamma: f64,
    pub sched_decay: f64,
    pub schedule: Schedule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-3,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch: 32,
            epochs: 50,
            sched_gamma: 0.0003,
            sched_decay: 0.8,
            schedule: Schedule::InverseDecay,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [("lr0", self.lr0), ("sched_gamma", self.sched_gamma), ("sched_decay", self.sched_decay)];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight_decay must be non-negative, got {}", self.weight_decay)));
        }
        if self.batch == 0 || self.epochs == 0 {
            return Err(Error::Config("batch and epochs must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn lr_at(tc: &TrainConfig, iter: u64) -> f64 {
    let x = tc.sched_gamma * iter as f64;
    match tc.schedule {
        Schedule::InverseDecay => tc.lr0 * (1.0 + x).powf(-tc.sched_decay),
        Schedule::Exponential => tc.lr0 * tc.sched_decay.powf(x),
    }
}

/// Per-epoch mean losses. `supervised` is the MAE in degrees over the epoch's
/// source windows; `transfer` is the unweighted transfer loss averaged over
/// batches (empty when no transfer term was used).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub supervised: Vec<f64>,
    pub transfer: Vec<f64>,
}

/// CSV with header `epoch,supervised_loss,transfer_loss`; epochs count from 1.
/// Missing transfer values are written as 0.
pub fn loss_trace_csv(trace: &LossTrace) -> String {
    let mut s = String::from("epoch,supervised_loss,transfer_loss\n");
    for (e, sup) in trace.supervised.iter().enumerate() {
        let tl = trace.transfer.get(e).copied().unwrap_or(0.0);
        writeln!(s, "{},{sup},{tl}", e + 1).unwrap();
    }
    s
}

/// Inverse of [`loss_trace_csv`]. A transfer column of all zeros reads back
/// as an empty transfer trace only if every value is zero.
pub fn parse_loss_trace_csv(text: &str) -> Result<LossTrace> {
    let mut lines = text.lines();
    if lines.next() != Some("epoch,supervised_loss,transfer_loss") {
        return Err(Error::Schema("loss trace must start with `epoch,supervised_loss,transfer_loss`".into()));
    }
    let mut trace = LossTrace::default();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let row = i + 2;
        let p: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse { row, msg: format!("expected `epoch,supervised_loss,transfer_loss`, got {line:?}") };
        if p.len() != 3 || p[0].parse::<usize>().map_err(|_| bad())? != i + 1 {
            return Err(bad());
        }
        trace.supervised.push(p[1].parse().map_err(|_| bad())?);
        trace.transfer.push(p[2].parse().map_err(|_| bad())?);
    }
    if trace.transfer.iter().all(|&v| v == 0.0) {
        trace.transfer.clear();
    }
    Ok(trace)
}

/// SGD with momentum and L2 weight decay folded into the gradient.
pub(crate) struct Sgd {
    velocity: Vec<f64>,
    momentum: f64,
    weight_decay: f64,
}

impl Sgd {
    pub fn new(n: usize, momentum: f64, weight_decay: f64) -> Self {
        Self { velocity: vec![0.0; n], momentum, weight_decay }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.momentum * *v - lr * (g + self.weight_decay * *p);
            *p += *v;
        }
    }
}

/// A loss on FC2 features of a source batch and a target batch.
pub(crate) trait Transfer {
    /// Returns the loss and writes into `gs`/`gt` the gradient the feature
    /// extractor should descend, before scaling by the transfer weight.
    /// `lr` is the current step size, for transfers that carry their own
    /// parameters.
    fn step(&mut self, fs: &[f64], ft: &[f64], d: usize, gs: &mut [f64], gt: &mut [f64], lr: f64) -> Result<f64>;
}

pub(crate) struct TransferPlan<'a> {
    pub target: &'a Dataset,
    pub weight: f64,
    pub hook: &'a mut dyn Transfer,
}

/// Flattened normalized readings; window `i` is `[2i, 2(i+W))`.
fn normalized_flat(model: &RegressorModel, ds: &Dataset) -> Vec<f64> {
    ds.frames().iter().flat_map(|f| model.norm.apply(f.r)).collect()
}

/// Fit the model to `ds` and return its loss trace. The input normalization
/// is refit on `ds` (1st/99th percentiles) before the first step.
pub fn train(model: &mut RegressorModel, ds: &Dataset, tc: &TrainConfig) -> Result<LossTrace> {
    run_training(model, ds, tc, None)
}

pub(crate) fn run_training(model: &mut RegressorModel, ds: &Dataset, tc: &TrainConfig, plan: Option<TransferPlan<'_>>) -> Result<LossTrace> {
    tc.validate()?;
    model.config.validate()?;
    let labels = ds.require_labels("training")?;
    let w = model.config.window;
    if ds.len() < w {
        return Err(Error::InsufficientData(format!("training needs at least {w} frames, got {}", ds.len())));
    }
    model.norm = normalize_fit(ds, 1.0, 99.0)?;
    let layout = Layout::new(&model.config);
    let xs = normalized_flat(model, ds);
    let ys: Vec<f64> = labels.iter().map(|y| y / model.label_scale).collect();
    let n_win = ds.len() - w + 1;

    // A zero-weight plan still records the transfer loss but never touches
    // the regressor's gradient, so the parameter trajectory matches plain
    // training exactly.
    let mut plan = plan;
    let target_xs = match &plan {
        Some(p) => {
            if p.target.len() < w {
                return Err(Error::InsufficientData(format!("target needs at least {w} frames, got {}", p.target.len())));
            }
            Some(normalized_flat(model, p.target))
        }
        None => None,
    };
    let n_target_win = plan.as_ref().map(|p| p.target.len() - w + 1).unwrap_or(0);

    let d = model.config.feature_dim();
    let b_max = tc.batch;
    let mut src_tr: Vec<Trace> = (0..b_max.min(n_win)).map(|_| Trace::new(&layout)).collect();
    let mut tgt_tr: Vec<Trace> = if plan.is_some() { (0..b_max.min(n_win)).map(|_| Trace::new(&layout)).collect() } else { Vec::new() };
    let mut scratch = Scratch::new(&layout);
    let mut grad = vec![0.0; layout.total];
    let mut fs = Vec::new();
    let mut ft = Vec::new();
    let mut gs = Vec::new();
    let mut gt = Vec::new();
    let mut sgd = Sgd::new(layout.total, tc.momentum, tc.weight_decay);

    let mut shuffle_rng = seed::stream(tc.seed, "train/shuffle");
    let mut target_rng = seed::stream(tc.seed, "train/target-batches");
    let mut order: Vec<usize> = (0..n_win).collect();
    let mut trace = LossTrace::default();
    let mut iter: u64 = 0;

    for epoch in 0..tc.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut abs_sum = 0.0;
        let mut transfer_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(b_max) {
            let bn = batch.len();
            let inv_b = 1.0 / bn as f64;
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut dys = Vec::with_capacity(bn);
            for (k, &i) in batch.iter().enumerate() {
                let y = net::forward(&model.params, &layout, &xs[2 * i..2 * (i + w)], &mut src_tr[k]);
                let r = y - ys[i + w - 1];
                if !r.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite loss at epoch {}, iteration {iter}, window {i} (prediction {y})",
                        epoch + 1
                    )));
                }
                abs_sum += r.abs();
                dys.push(if r > 0.0 { inv_b } else if r < 0.0 { -inv_b } else { 0.0 });
            }

            let mut extra_s: Option<&[f64]> = None;
            let lr = lr_at(tc, iter);
            if let (Some(p), Some(txs)) = (plan.as_mut(), target_xs.as_ref()) {
                fs.clear();
                ft.clear();
                for tr in &src_tr[..bn] {
                    fs.extend_from_slice(&tr.z2);
                }
                for tr in tgt_tr[..bn].iter_mut() {
                    let j = target_rng.random_range(0..n_target_win);
                    net::forward(&model.params, &layout, &txs[2 * j..2 * (j + w)], tr);
                    ft.extend_from_slice(&tr.z2);
                }
                gs.resize(fs.len(), 0.0);
                gt.resize(ft.len(), 0.0);
                let tl = p.hook.step(&fs, &ft, d, &mut gs, &mut gt, lr)?;
                if !tl.is_finite() {
                    return Err(Error::Numerical(format!("non-finite transfer loss at epoch {}, iteration {iter}", epoch + 1)));
                }
                transfer_sum += tl;
                if p.weight != 0.0 {
                gs.iter_mut().for_each(|g| *g *= p.weight);
                gt.iter_mut().for_each(|g| *g *= p.weight);
                for (k, tr) in tgt_tr[..bn].iter().enumerate() {
                    net::backward(&model.params, &layout, tr, 0.0, Some(&gt[k * d..(k + 1) * d]), &mut grad, &mut scratch);
                }
                extra_s = Some(&gs);
                }
            }
            for (k, tr) in src_tr[..bn].iter().enumerate() {
                let extra = extra_s.map(|e| &e[k * d..(k + 1) * d]);
                net::backward(&model.params, &layout, tr, dys[k], extra, &mut grad, &mut scratch);
            }
            if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!("gradient component {k} is {} at iteration {iter}", grad[k])));
            }
            sgd.step(&mut model.params, &grad, lr);
            if let Some(k) = model.params.iter().position(|p| !p.is_finite()) {
                return Err(Error::Numerical(format!("parameter {k} became {} at iteration {iter}", model.params[k])));
            }
            iter += 1;
            batches += 1;
        }
        let sup = abs_sum / n_win as f64 * model.label_scale;
        log::debug!("epoch {}: supervised MAE {sup:.4} deg", epoch + 1);
        trace.supervised.push(sup);
        if plan.is_some() {
            trace.transfer.push(transfer_sum / batches as f64);
        }
    }
    Ok(trace)
}
