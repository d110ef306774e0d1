//! Distribution-based adaptation baselines sharing the regressor
//! architecture: Source-Only, MMD, CORAL and gradient-reversal adversarial
//! training, each acting on the FC2 output.

mod adversarial;
mod losses;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::regressor::{run_training, LossTrace, RegressorModel, TrainConfig, Transfer, TransferPlan};

pub use adversarial::{adversarial_step, AdversarialStep, DomainClassifier};
pub use losses::{coral_loss, coral_loss_grad, median_pairwise_distance, mmd_loss, mmd_loss_grad};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DidaMethod {
    SourceOnly,
    Mmd,
    Coral,
    Adversarial,
}

impl DidaMethod {
    pub const ALL: [DidaMethod; 4] = [DidaMethod::SourceOnly, DidaMethod::Mmd, DidaMethod::Coral, DidaMethod::Adversarial];

    pub fn as_str(self) -> &'static str {
        match self {
            DidaMethod::SourceOnly => "source-only",
            DidaMethod::Mmd => "mmd",
            DidaMethod::Coral => "coral",
            DidaMethod::Adversarial => "adversarial",
        }
    }
}

impl fmt::Display for DidaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DidaMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DidaMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown method {s:?} (expected source-only, mmd, coral or adversarial)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DidaConfig {
    pub method: DidaMethod,
    pub transfer_weight: f64,
    /// Multiples of the per-batch median pairwise distance.
    pub bandwidth_multipliers: Vec<f64>,
    pub classifier_hidden: usize,
}

impl Default for DidaConfig {
    fn default() -> Self {
        Self { method: DidaMethod::SourceOnly, transfer_weight: 1.0, bandwidth_multipliers: vec![0.25, 0.5, 1.0, 2.0, 4.0], classifier_hidden: 64 }
    }
}

impl DidaConfig {
    pub fn new(method: DidaMethod) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.transfer_weight.is_finite() && self.transfer_weight >= 0.0) {
            return Err(Error::Config(format!("transfer_weight must be >= 0, got {}", self.transfer_weight)));
        }
        if !self.bandwidth_multipliers.iter().any(|&b| b.is_finite() && b > 0.0) || self.bandwidth_multipliers.iter().any(|&b| !(b.is_finite() && b > 0.0)) {
            return Err(Error::Config(format!("bandwidth multipliers must all be positive, got {:?}", self.bandwidth_multipliers)));
        }
        if self.classifier_hidden == 0 {
            return Err(Error::Config("classifier_hidden must be at least 1".into()));
        }
        Ok(())
    }
}

struct MmdHook {
    multipliers: Vec<f64>,
    sigmas: Vec<f64>,
}

impl Transfer for MmdHook {
    fn step(&mut self, fs: &[f64], ft: &[f64], d: usize, gs: &mut [f64], gt: &mut [f64], _lr: f64) -> Result<f64> {
        let med = median_pairwise_distance(fs, ft, d);
        self.sigmas.clear();
        self.sigmas.extend(self.multipliers.iter().map(|m| m * med));
        losses::mmd_with_grad(fs, ft, d, &self.sigmas, Some((gs, gt)))
    }
}

struct CoralHook;

impl Transfer for CoralHook {
    fn step(&mut self, fs: &[f64], ft: &[f64], d: usize, gs: &mut [f64], gt: &mut [f64], _lr: f64) -> Result<f64> {
        let (l, a, b) = coral_loss_grad(fs, ft, d)?;
        gs.copy_from_slice(&a);
        gt.copy_from_slice(&b);
        Ok(l)
    }
}

struct AdversarialHook {
    classifier: DomainClassifier,
    velocity: Vec<f64>,
    momentum: f64,
    weight_decay: f64,
}

impl Transfer for AdversarialHook {
    fn step(&mut self, fs: &[f64], ft: &[f64], d: usize, gs: &mut [f64], gt: &mut [f64], lr: f64) -> Result<f64> {
        // λ is applied by the trainer, so the reversal here uses unit weight.
        let out = adversarial_step(fs, ft, d, &self.classifier, 1.0)?;
        gs.copy_from_slice(&out.grad_s);
        gt.copy_from_slice(&out.grad_t);
        let p = &mut self.classifier.params;
        for ((w, v), g) in p.iter_mut().zip(&mut self.velocity).zip(&out.classifier_grad) {
            *v = self.momentum * *v - lr * (g + self.weight_decay * *w);
            *w += *v;
        }
        Ok(out.loss)
    }
}

/// Train `model` on labeled `source` with the configured transfer loss
/// against unlabeled `target` windows. Target batches are drawn with
/// replacement, one per source batch and of the same size.
pub fn train_dida(cfg: &DidaConfig, model: &mut RegressorModel, source: &Dataset, target: &Dataset, tc: &TrainConfig) -> Result<LossTrace> {
    cfg.validate()?;
    let d = model.config.feature_dim();
    let mut hook: Box<dyn Transfer> = match cfg.method {
        DidaMethod::SourceOnly => return run_training(model, source, tc, None),
        DidaMethod::Mmd => Box::new(MmdHook { multipliers: cfg.bandwidth_multipliers.clone(), sigmas: Vec::new() }),
        DidaMethod::Coral => Box::new(CoralHook),
        DidaMethod::Adversarial => {
            let classifier = DomainClassifier::new(d, cfg.classifier_hidden, crate::seed::derive(tc.seed, "dida/classifier"));
            let n = classifier.params.len();
            Box::new(AdversarialHook { classifier, velocity: vec![0.0; n], momentum: tc.momentum, weight_decay: tc.weight_decay })
        }
    };
    if target.is_empty() {
        return Err(Error::Empty(format!("{} needs target frames", cfg.method)));
    }
    let plan = TransferPlan { target, weight: cfg.transfer_weight, hook: hook.as_mut() };
    run_training(model, source, tc, Some(plan))
}
