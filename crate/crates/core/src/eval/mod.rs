//! Metrics, the end-to-end adaptation pipeline, benchmarks, sweeps,
//! reports and SVG plots.

mod bench;
mod pipeline;
mod report;
pub mod svg;

pub use bench::{
    bench_data, parse_results_csv, parse_sweep_csv, report_from_dir, result_rows, results_csv, run_benchmark, run_method, run_seed,
    size_sweep, sweep_csv, sweep_summary, write_seed_artifacts, BenchData, BenchmarkConfig, Method, MethodRun, ResultRow, SeedRun,
    SweepRow,
};
pub use pipeline::{adapt, evaluate, train_baseline, train_supervised, Adaptation, SudaConfig};
pub use report::{render_report, render_sweep_report};

use crate::error::{Error, Result};

/// Mean absolute error in degrees; the same definition as the training loss.
pub fn mae_deg(preds: &[f64], labels: &[f64]) -> Result<f64> {
    crate::regressor::loss_mae(preds, labels)
}

/// Mean and sample (n−1) standard deviation.
pub fn aggregate(runs: &[f64]) -> Result<(f64, f64)> {
    if runs.len() < 2 {
        return Err(Error::InsufficientData(format!("aggregation needs at least 2 runs, got {}", runs.len())));
    }
    let mut sorted = runs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}
