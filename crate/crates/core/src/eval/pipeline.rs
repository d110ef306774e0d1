//! End-to-end SuDA: fit both supports, register, pseudo-label, train.

use serde::{Deserialize, Serialize};

use crate::baselines::{train_dida, DidaConfig};
use crate::data::Dataset;
use crate::error::Result;
use crate::regressor::{init_model, train, LossTrace, RegressorConfig, RegressorModel, TrainConfig};
use crate::seed;
use crate::support::{build_pseudo_dataset, fit_support, RegistrationMap, DEFAULT_BINS, DEFAULT_PROXIES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SudaConfig {
    pub bins: usize,
    pub proxies: usize,
    pub regressor: RegressorConfig,
    pub train: TrainConfig,
}

impl Default for SudaConfig {
    fn default() -> Self {
        Self { bins: DEFAULT_BINS, proxies: DEFAULT_PROXIES, regressor: RegressorConfig::default(), train: TrainConfig::default() }
    }
}

impl SudaConfig {
    /// Narrow network, larger step and fewer epochs: the single-core
    /// benchmark preset. Everything else keeps the defaults.
    pub fn compact() -> Self {
        Self {
            regressor: RegressorConfig { fc1_out: 8, lstm_hidden: 8, fc2_out: 16, ..RegressorConfig::default() },
            train: TrainConfig { lr0: 1e-2, epochs: 15, ..TrainConfig::default() },
            ..Self::default()
        }
    }

    /// Training config with its seed replaced by a stream derived from `root`.
    fn train_for(&self, root: u64, label: &str) -> TrainConfig {
        TrainConfig { seed: seed::derive(root, &format!("{label}/train")), ..self.train.clone() }
    }

    fn model_for(&self, root: u64, label: &str) -> Result<RegressorModel> {
        init_model(self.regressor, seed::derive(root, &format!("{label}/init")))
    }
}

#[derive(Debug, Clone)]
pub struct Adaptation {
    pub model: RegressorModel,
    pub map: RegistrationMap,
    pub pseudo: Dataset,
    pub trace: LossTrace,
}

/// Adapt labeled `source` to unlabeled `target`. Target labels, if present,
/// are never read.
pub fn adapt(source: &Dataset, target: &Dataset, cfg: &SudaConfig, root_seed: u64) -> Result<Adaptation> {
    source.require_labels("adaptation source")?;
    let curve_s = fit_support(source, cfg.bins, cfg.proxies)?;
    let curve_t = fit_support(target, cfg.bins, cfg.proxies)?;
    let map = RegistrationMap::new(curve_s, curve_t)?;
    let pseudo = build_pseudo_dataset(source, &map)?;
    let mut model = cfg.model_for(root_seed, "suda")?;
    let trace = train(&mut model, &pseudo, &cfg.train_for(root_seed, "suda"))?;
    Ok(Adaptation { model, map, pseudo, trace })
}

/// Supervised training on labeled data with the same conventions as [`adapt`].
pub fn train_supervised(ds: &Dataset, cfg: &SudaConfig, root_seed: u64) -> Result<(RegressorModel, LossTrace)> {
    let mut model = cfg.model_for(root_seed, "supervised")?;
    let trace = train(&mut model, ds, &cfg.train_for(root_seed, "supervised"))?;
    Ok((model, trace))
}

/// A distribution-based baseline. All methods share one init and shuffle
/// stream, so they differ only through the transfer term.
pub fn train_baseline(dida: &DidaConfig, source: &Dataset, target: &Dataset, cfg: &SudaConfig, root_seed: u64) -> Result<(RegressorModel, LossTrace)> {
    let mut model = cfg.model_for(root_seed, "baseline")?;
    let trace = train_dida(dida, &mut model, source, target, &cfg.train_for(root_seed, "baseline"))?;
    Ok((model, trace))
}

/// Test MAE in degrees of `model` on labeled `test`.
pub fn evaluate(model: &RegressorModel, test: &Dataset) -> Result<f64> {
    let labels = test.require_labels("evaluation")?;
    let preds = model.predict_series(test)?;
    super::mae_deg(&preds, labels)
}
