//! Markdown tables. Numbers use fixed precision so output bytes depend only
//! on the inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::bench::{sweep_summary, Method, ResultRow, SweepRow};
use crate::error::{Error, Result};

fn mean_std(values: &[f64]) -> String {
    match super::aggregate(values) {
        Ok((m, s)) => format!("{m:.2} ± {s:.2}"),
        Err(_) => format!("{:.2}", values[0]),
    }
}

/// Method × MAE table plus one column per seed.
pub fn render_report(rows: &[ResultRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Empty("no results to report".into()));
    }
    let mut by_method: BTreeMap<Method, BTreeMap<u64, f64>> = BTreeMap::new();
    for r in rows {
        if by_method.entry(r.method).or_default().insert(r.seed, r.mae).is_some() {
            return Err(Error::Argument(format!("duplicate result for {} seed {}", r.method, r.seed)));
        }
    }
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();

    let mut s = String::from("# Surrogate benchmark\n\nTarget test MAE in degrees, mean ± sample std over seeds.\n\n");
    s.push_str("| Method | MAE | Runs |");
    for sd in &seeds {
        write!(s, " seed {sd} |").unwrap();
    }
    s.push_str("\n|---|---|---|");
    s.push_str(&"---|".repeat(seeds.len()));
    s.push('\n');
    for (method, runs) in &by_method {
        let values: Vec<f64> = runs.values().copied().collect();
        write!(s, "| {} | {} | {} |", method.title(), mean_std(&values), values.len()).unwrap();
        for sd in &seeds {
            match runs.get(sd) {
                Some(v) => write!(s, " {v:.3} |").unwrap(),
                None => s.push_str(" – |"),
            }
        }
        s.push('\n');
    }
    if let (Some(suda), Some(so)) = (by_method.get(&Method::Suda), by_method.get(&Method::SourceOnly)) {
        let mean = |m: &BTreeMap<u64, f64>| m.values().sum::<f64>() / m.len() as f64;
        write!(s, "\nSource-Only / SuDA MAE ratio: {:.2}\n", mean(so) / mean(suda)).unwrap();
    }
    Ok(s)
}

pub fn render_sweep_report(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Empty("no sweep results to report".into()));
    }
    let mut s = String::from("# Source size sweep\n\nSuDA target test MAE in degrees.\n\n| Source frames | MAE | Runs |\n|---|---|---|\n");
    for (size, _, _) in sweep_summary(rows) {
        let values: Vec<f64> = rows.iter().filter(|r| r.size == size).map(|r| r.mae).collect();
        writeln!(s, "| {size} | {} | {} |", mean_std(&values), values.len()).unwrap();
    }
    Ok(s)
}
