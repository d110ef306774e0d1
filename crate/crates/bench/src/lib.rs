//! Fixtures shared by the criterion benchmarks in `benches/`.

use suda_core::eval::{bench_data, BenchData, BenchmarkConfig};
use suda_core::Dataset;

/// Seed-0 data of the standard benchmark with `source_frames` source frames.
pub fn standard_data(source_frames: usize) -> BenchData {
    let cfg = BenchmarkConfig { source_frames, ..BenchmarkConfig::default() };
    bench_data(&cfg, 0).expect("standard benchmark data")
}

/// The first `batch` length-`window` windows of `ds`, with their labels.
pub fn windows(ds: &Dataset, window: usize, batch: usize) -> (Vec<Vec<[f64; 2]>>, Vec<f64>) {
    let r = ds.readings();
    let labels = ds.labels().expect("labeled dataset");
    (0..batch).map(|i| (r[i..i + window].to_vec(), labels[i + window - 1])).unzip()
}
