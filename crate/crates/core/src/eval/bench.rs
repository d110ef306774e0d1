//! The surrogate benchmark: every method on the same per-seed domain pair,
//! persisted so reports can be re-rendered from disk.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::pipeline::{adapt, evaluate, train_baseline, train_supervised, SudaConfig};
use crate::baselines::{DidaConfig, DidaMethod};
use crate::data::{self, Dataset};
use crate::error::{Error, Result};
use crate::regressor::{loss_trace_csv, LossTrace, RegressorModel};
use crate::seed;
use crate::sim::{make_domain_pair, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Suda,
    Supervised,
    SourceOnly,
    Mmd,
    Coral,
    Adversarial,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Suda, Method::Supervised, Method::SourceOnly, Method::Mmd, Method::Coral, Method::Adversarial];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Suda => "suda",
            Method::Supervised => "supervised",
            Method::SourceOnly => "source-only",
            Method::Mmd => "mmd",
            Method::Coral => "coral",
            Method::Adversarial => "adversarial",
        }
    }

    /// Row label used in reports.
    pub fn title(self) -> &'static str {
        match self {
            Method::Suda => "SuDA",
            Method::Supervised => "Supervised (target labels)",
            Method::SourceOnly => "Source-Only",
            Method::Mmd => "MMD",
            Method::Coral => "CORAL",
            Method::Adversarial => "Adversarial",
        }
    }

    fn dida(self) -> Option<DidaMethod> {
        match self {
            Method::SourceOnly => Some(DidaMethod::SourceOnly),
            Method::Mmd => Some(DidaMethod::Mmd),
            Method::Coral => Some(DidaMethod::Coral),
            Method::Adversarial => Some(DidaMethod::Adversarial),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| Error::Argument(format!("unknown method {s:?}")))
    }
}

/// Benchmark description. For every seed, trajectory and noise seeds of both
/// domains are replaced by streams derived from that seed, so each run sees
/// fresh motion and noise under the same sensor models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub sim: SimConfig,
    pub source_frames: usize,
    pub target_frames: usize,
    /// Chronological fraction of the target kept for adaptation; the rest is the test set.
    pub target_split: f64,
    pub suda: SudaConfig,
    /// Transfer settings shared by the distribution-based baselines; `method` is ignored.
    pub dida: DidaConfig,
    pub seeds: Vec<u64>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::standard(),
            source_frames: 30_000,
            target_frames: 10_000,
            target_split: 0.7,
            suda: SudaConfig::compact(),
            dida: DidaConfig::default(),
            seeds: vec![0, 1, 2, 3],
        }
    }
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for d in [&self.sim.source, &self.sim.target] {
            d.trajectory.validate()?;
            d.sensor.validate(d.trajectory.angle_min, d.trajectory.angle_max)?;
        }
        if !(self.target_split > 0.0 && self.target_split < 1.0) {
            return Err(Error::Config(format!("target_split must lie in (0, 1), got {}", self.target_split)));
        }
        self.suda.regressor.validate()?;
        self.suda.train.validate()?;
        self.dida.validate()
    }
}

/// One seed's data: labeled source, the unlabeled adaptation part of the
/// target, the same part with labels (supervised oracle only), and the test set.
#[derive(Debug, Clone)]
pub struct BenchData {
    pub source: Dataset,
    pub target: Dataset,
    pub target_labeled: Dataset,
    pub test: Dataset,
}

pub fn bench_data(cfg: &BenchmarkConfig, run_seed: u64) -> Result<BenchData> {
    let mut sim = cfg.sim.clone();
    sim.source.trajectory.seed = seed::derive(run_seed, "bench/source-trajectory");
    sim.target.trajectory.seed = seed::derive(run_seed, "bench/target-trajectory");
    let noise = (seed::derive(run_seed, "bench/source-noise"), seed::derive(run_seed, "bench/target-noise"));
    let pair = make_domain_pair(&sim, cfg.source_frames, cfg.target_frames, noise)?;
    let (target_labeled, test) = data::split_chrono(&pair.target_eval, cfg.target_split)?;
    let target = data::strip_labels(&target_labeled)?;
    Ok(BenchData { source: pair.source, target, target_labeled, test })
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub mae: f64,
    pub trace: LossTrace,
    pub model: RegressorModel,
    /// Wall-clock training time; informational only and never persisted.
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub runs: Vec<MethodRun>,
}

impl SeedRun {
    pub fn get(&self, m: Method) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == m)
    }

    pub fn mae(&self, m: Method) -> Option<f64> {
        self.get(m).map(|r| r.mae)
    }
}

pub fn run_method(cfg: &BenchmarkConfig, data: &BenchData, method: Method, run_seed: u64) -> Result<MethodRun> {
    let start = Instant::now();
    let (model, trace) = match method {
        Method::Suda => {
            let a = adapt(&data.source, &data.target, &cfg.suda, run_seed)?;
            (a.model, a.trace)
        }
        Method::Supervised => train_supervised(&data.target_labeled, &cfg.suda, run_seed)?,
        other => {
            let dida = DidaConfig { method: other.dida().expect("baseline method"), ..cfg.dida.clone() };
            train_baseline(&dida, &data.source, &data.target, &cfg.suda, run_seed)?
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let mae = evaluate(&model, &data.test)?;
    log::info!("seed {run_seed} {method}: MAE {mae:.3} deg ({seconds:.1} s)");
    Ok(MethodRun { method, mae, trace, model, seconds })
}

pub fn run_seed(cfg: &BenchmarkConfig, run_seed: u64, methods: &[Method]) -> Result<SeedRun> {
    cfg.validate()?;
    let data = bench_data(cfg, run_seed)?;
    let runs = methods.iter().map(|&m| run_method(cfg, &data, m, run_seed)).collect::<Result<Vec<_>>>()?;
    Ok(SeedRun { seed: run_seed, runs })
}

/// One persisted test MAE.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub seed: u64,
    pub mae: f64,
}

pub fn result_rows(runs: &[SeedRun]) -> Vec<ResultRow> {
    let mut rows: Vec<ResultRow> = runs.iter().flat_map(|s| s.runs.iter().map(|r| ResultRow { method: r.method, seed: s.seed, mae: r.mae })).collect();
    rows.sort_by_key(|r| (r.method, r.seed));
    rows
}

/// `method,seed,mae` with shortest round-trip float formatting.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from("method,seed,mae\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.method, r.seed, r.mae));
    }
    s
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    if lines.next() != Some("method,seed,mae") {
        return Err(Error::Schema("results file must start with `method,seed,mae`".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let row = i + 2;
            let parts: Vec<&str> = l.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Parse { row, msg: format!("expected 3 fields, got {}", parts.len()) });
            }
            let bad = |what: &str| Error::Parse { row, msg: format!("bad {what}") };
            Ok(ResultRow {
                method: parts[0].parse().map_err(|_| bad("method"))?,
                seed: parts[1].parse().map_err(|_| bad("seed"))?,
                mae: parts[2].parse().map_err(|_| bad("mae"))?,
            })
        })
        .collect()
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Models under `models/`, loss traces under `traces/`, named `<method>-seed<k>`.
pub fn write_seed_artifacts(dir: &Path, run: &SeedRun) -> Result<()> {
    for r in &run.runs {
        let stem = format!("{}-seed{}", r.method, run.seed);
        write(&dir.join("models").join(format!("{stem}.model")), &r.model.to_text())?;
        write(&dir.join("traces").join(format!("{stem}.csv")), &loss_trace_csv(&r.trace))?;
    }
    Ok(())
}

/// Run every method for every configured seed. With `out`, writes the config,
/// per-seed artifacts, `results.csv` and `report.md`.
pub fn run_benchmark(cfg: &BenchmarkConfig, methods: &[Method], out: Option<&Path>) -> Result<Vec<SeedRun>> {
    if cfg.seeds.is_empty() {
        return Err(Error::Config("benchmark needs at least one seed".into()));
    }
    let mut all = Vec::new();
    for &s in &cfg.seeds {
        let run = run_seed(cfg, s, methods)?;
        if let Some(dir) = out {
            write_seed_artifacts(dir, &run)?;
        }
        all.push(run);
    }
    if let Some(dir) = out {
        write(&dir.join("benchmark.toml"), &cfg.to_toml())?;
        let rows = result_rows(&all);
        write(&dir.join("results.csv"), &results_csv(&rows))?;
        write(&dir.join("report.md"), &super::report::render_report(&rows)?)?;
    }
    Ok(all)
}

/// Re-render `report.md` content from a persisted `results.csv`.
pub fn report_from_dir(dir: &Path) -> Result<String> {
    let path = dir.join("results.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    super::report::render_report(&parse_results_csv(&text)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub size: usize,
    pub seed: u64,
    pub mae: f64,
}

/// SuDA test MAE for each source size (the first `size` source frames) and
/// seed, against that seed's fixed target split. Rows are sorted by size,
/// then seed.
pub fn size_sweep(sizes: &[usize], cfg: &BenchmarkConfig, seeds: &[u64]) -> Result<Vec<SweepRow>> {
    if sizes.is_empty() || seeds.is_empty() {
        return Err(Error::Argument("sweep needs at least one size and one seed".into()));
    }
    if sizes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument(format!("sweep sizes must be ascending, got {sizes:?}")));
    }
    let min = cfg.suda.bins.max(cfg.suda.regressor.window);
    if sizes[0] < min {
        return Err(Error::Argument(format!("sweep size {} is below the minimum training size {min}", sizes[0])));
    }
    let largest = *sizes.last().expect("non-empty");
    let mut sized = cfg.clone();
    sized.source_frames = sized.source_frames.max(largest);
    sized.validate()?;
    let mut rows = Vec::new();
    for &s in seeds {
        let data = bench_data(&sized, s)?;
        for &size in sizes {
            let source = data.source.truncated(size);
            let a = adapt(&source, &data.target, &cfg.suda, s)?;
            let mae = evaluate(&a.model, &data.test)?;
            log::info!("sweep size {size} seed {s}: MAE {mae:.3} deg");
            rows.push(SweepRow { size, seed: s, mae });
        }
    }
    rows.sort_by_key(|r| (r.size, r.seed));
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("size,seed,mae\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.size, r.seed, r.mae));
    }
    s
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next() != Some("size,seed,mae") {
        return Err(Error::Schema("sweep file must start with `size,seed,mae`".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let row = i + 2;
            let p: Vec<&str> = l.split(',').collect();
            let bad = || Error::Parse { row, msg: format!("expected `size,seed,mae`, got {l:?}") };
            if p.len() != 3 {
                return Err(bad());
            }
            Ok(SweepRow { size: p[0].parse().map_err(|_| bad())?, seed: p[1].parse().map_err(|_| bad())?, mae: p[2].parse().map_err(|_| bad())? })
        })
        .collect()
}

/// Mean and sample standard deviation per size, ascending by size. A size
/// with a single run reports a standard deviation of NaN.
pub fn sweep_summary(rows: &[SweepRow]) -> Vec<(usize, f64, f64)> {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|size| {
            let v: Vec<f64> = rows.iter().filter(|r| r.size == size).map(|r| r.mae).collect();
            match super::aggregate(&v) {
                Ok((m, sd)) => (size, m, sd),
                Err(_) => (size, v[0], f64::NAN),
            }
        })
        .collect()
}
