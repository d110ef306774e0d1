use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use suda_core::bvh::{export_angles, load_bvh, JointTriple};
use suda_core::data::{load_csv, save_csv};
use suda_core::eval::{
    adapt, bench_data, evaluate, parse_results_csv, render_report, render_sweep_report, results_csv, run_benchmark, size_sweep, svg,
    sweep_csv, train_baseline, train_supervised, BenchmarkConfig, Method, ResultRow, SudaConfig,
};
use suda_core::regressor::{loss_trace_csv, parse_loss_trace_csv, LossTrace};
use suda_core::support::{build_pseudo_dataset, fit_support, support_evidence, RegistrationMap};
use suda_core::{Dataset, DidaMethod, Error, RegressorModel, SupportCurve};

use crate::{Cli, Command, PlotKind, Preset};

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn config(cli: &Cli) -> Result<BenchmarkConfig> {
    if let Some(path) = &cli.config {
        return Ok(BenchmarkConfig::from_toml(&read(path)?)?);
    }
    Ok(match cli.preset {
        Preset::Compact => BenchmarkConfig::default(),
        Preset::Full => BenchmarkConfig { suda: SudaConfig::default(), ..BenchmarkConfig::default() },
    })
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Labeled when the header has an angle column.
fn load_any(path: &Path) -> Result<Dataset> {
    let header = read(path)?.lines().next().unwrap_or_default().to_string();
    let labeled = header.split(',').any(|h| h.trim() == "angle_deg");
    Ok(load_csv(path, labeled)?)
}

fn supports(source: &Dataset, target: &Dataset, suda: &SudaConfig) -> Result<(SupportCurve, SupportCurve)> {
    Ok((fit_support(source, suda.bins, suda.proxies)?, fit_support(target, suda.bins, suda.proxies)?))
}

fn final_loss(trace: &LossTrace) -> f64 {
    trace.supervised.last().copied().unwrap_or(f64::NAN)
}

/// Writes `<method>-seed<k>.model` and `.trace.csv`; returns the model path.
fn save_model(out: &Path, method: Method, seed: u64, model: &RegressorModel, trace: &LossTrace) -> Result<PathBuf> {
    let base = format!("{method}-seed{seed}");
    let path = out.join(format!("{base}.model"));
    write(&path, model.to_text())?;
    write(&out.join(format!("{base}.trace.csv")), loss_trace_csv(trace))?;
    Ok(path)
}

fn baseline_method(name: &str) -> Result<(Method, DidaMethod)> {
    let m: Method = name.parse()?;
    match m {
        Method::Suda | Method::Supervised => Err(Error::Argument(format!("{name} is not a baseline; use `adapt` or `train`")).into()),
        _ => Ok((m, name.parse()?)),
    }
}

pub fn run(cli: &Cli) -> Result<String> {
    let out = cli.out.as_path();
    let seed = cli.seed.unwrap_or(0);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match &cli.command {
        Command::Simulate { frames, target_frames } => {
            let mut cfg = config(cli)?;
            cfg.source_frames = frames.unwrap_or(cfg.source_frames);
            cfg.target_frames = target_frames.unwrap_or(cfg.target_frames);
            cfg.validate()?;
            let d = bench_data(&cfg, seed)?;
            save_csv(&d.source, out.join("source.csv"))?;
            save_csv(&d.target, out.join("target.csv"))?;
            save_csv(&d.target_labeled, out.join("target_train_labeled.csv"))?;
            save_csv(&d.test, out.join("target_test.csv"))?;
            Ok(format!(
                "simulate: seed={seed} source={} target={} test={} out={}",
                d.source.len(),
                d.target.len(),
                d.test.len(),
                out.display()
            ))
        }
        Command::BvhAngle { file, parent, vertex, child } => {
            let doc = load_bvh(file)?;
            let triple = JointTriple::new(parent, vertex, child);
            let path = out.join(format!("{}.angles.csv", stem(file)));
            let angles = export_angles(&doc, &triple, &path)?;
            let (lo, hi) = angles.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            Ok(format!("bvh-angle: frames={} min={lo:.6} max={hi:.6} out={}", angles.len(), path.display()))
        }
        Command::FitSupport { data, bins, proxies } => {
            let cfg = config(cli)?;
            let ds = load_any(data)?;
            let curve = fit_support(&ds, bins.unwrap_or(cfg.suda.bins), proxies.unwrap_or(cfg.suda.proxies))?;
            let path = out.join(format!("{}.support", stem(data)));
            write(&path, curve.to_text())?;
            Ok(format!("fit-support: proxies={} length={:.6} out={}", curve.n() + 1, curve.total_len(), path.display()))
        }
        Command::Register { source, target, bins, proxies } => {
            let cfg = config(cli)?.suda;
            let suda = SudaConfig { bins: bins.unwrap_or(cfg.bins), proxies: proxies.unwrap_or(cfg.proxies), ..cfg };
            let s = load_csv(source, true)?;
            let (cs, ct) = supports(&s, &load_csv(target, false)?, &suda)?;
            let pseudo = build_pseudo_dataset(&s, &RegistrationMap::new(cs, ct)?)?;
            let path = out.join("pseudo.csv");
            save_csv(&pseudo, &path)?;
            Ok(format!("register: frames={} proxies={} out={}", pseudo.len(), suda.proxies + 1, path.display()))
        }
        Command::Adapt { source, target, bins, proxies } => {
            let mut cfg = config(cli)?.suda;
            cfg.bins = bins.unwrap_or(cfg.bins);
            cfg.proxies = proxies.unwrap_or(cfg.proxies);
            let a = adapt(&load_csv(source, true)?, &load_csv(target, false)?, &cfg, seed)?;
            let path = save_model(out, Method::Suda, seed, &a.model, &a.trace)?;
            write(&out.join(format!("suda-seed{seed}.source.support")), a.map.source.to_text())?;
            write(&out.join(format!("suda-seed{seed}.target.support")), a.map.target.to_text())?;
            Ok(format!("adapt: pseudo={} final_loss={:.4} model={}", a.pseudo.len(), final_loss(&a.trace), path.display()))
        }
        Command::Train { data } => {
            let cfg = config(cli)?.suda;
            let (model, trace) = train_supervised(&load_csv(data, true)?, &cfg, seed)?;
            let path = save_model(out, Method::Supervised, seed, &model, &trace)?;
            Ok(format!("train: final_loss={:.4} model={}", final_loss(&trace), path.display()))
        }
        Command::Baseline { method, source, target, transfer_weight } => {
            let cfg = config(cli)?;
            let (m, dm) = baseline_method(method)?;
            let mut dida = cfg.dida.clone();
            dida.method = dm;
            dida.transfer_weight = transfer_weight.unwrap_or(dida.transfer_weight);
            dida.validate()?;
            let (model, trace) = train_baseline(&dida, &load_csv(source, true)?, &load_csv(target, false)?, &cfg.suda, seed)?;
            let path = save_model(out, m, seed, &model, &trace)?;
            let transfer = trace.transfer.last().copied().unwrap_or(0.0);
            Ok(format!("baseline: method={m} final_loss={:.4} final_transfer={transfer:.6} model={}", final_loss(&trace), path.display()))
        }
        Command::Eval { model, test, method } => {
            let m = RegressorModel::load(model)?;
            let mae = evaluate(&m, &load_csv(test, true)?)?;
            if let Some(name) = method {
                let method: Method = name.parse()?;
                let path = out.join(format!("{method}-seed{seed}.result.csv"));
                write(&path, results_csv(&[ResultRow { method, seed, mae }]))?;
            }
            Ok(format!("eval: mae={mae}"))
        }
        Command::Sweep { sizes, seeds } => {
            let cfg = config(cli)?;
            let seeds = seeds.clone().or_else(|| cli.seed.map(|s| vec![s])).unwrap_or_else(|| cfg.seeds.clone());
            let rows = size_sweep(sizes, &cfg, &seeds)?;
            write(&out.join("sweep.csv"), sweep_csv(&rows))?;
            write(&out.join("sweep.md"), render_sweep_report(&rows)?)?;
            Ok(format!("sweep: sizes={} seeds={} out={}", sizes.len(), seeds.len(), out.display()))
        }
        Command::Evidence { source, target, k, bins, proxies } => {
            let cfg = config(cli)?.suda;
            let suda = SudaConfig { bins: bins.unwrap_or(cfg.bins), proxies: proxies.unwrap_or(cfg.proxies), ..cfg };
            let (s, t) = (load_csv(source, true)?, load_csv(target, true)?);
            let (cs, ct) = supports(&s, &t, &suda)?;
            let table = support_evidence(&cs, &s, &ct, &t, *k)?;
            write(&out.join("evidence.csv"), table.to_csv())?;
            write(&out.join("evidence.svg"), svg::evidence_curves(&table)?)?;
            let labels = s.labels().into_iter().chain(t.labels()).flatten();
            let (lo, hi) = labels.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let threshold = 2.0 * (hi - lo) / *k as f64;
            let gap = table.max_gap();
            Ok(format!("evidence: k={k} max_gap={gap:.4} threshold={threshold:.4} within={}", gap <= threshold))
        }
        Command::Plot { kind, source, target, model, test, trace, k } => {
            let need = |p: &Option<PathBuf>, flag: &str| -> Result<PathBuf> {
                p.clone().ok_or_else(|| Error::Argument(format!("plot --kind {kind:?} needs --{flag}")).into())
            };
            let suda = config(cli)?.suda;
            let svg_text = match kind {
                PlotKind::Support | PlotKind::Registration | PlotKind::Evidence => {
                    let (s, t) = (load_any(&need(source, "source")?)?, load_any(&need(target, "target")?)?);
                    let (cs, ct) = supports(&s, &t, &suda)?;
                    match kind {
                        PlotKind::Support => svg::support_overlay(&cs, &s.readings(), &ct, &t.readings())?,
                        PlotKind::Registration => svg::registration_lines(&RegistrationMap::new(cs, ct)?)?,
                        _ => svg::evidence_curves(&support_evidence(&cs, &s, &ct, &t, *k)?)?,
                    }
                }
                PlotKind::Prediction => {
                    let m = RegressorModel::load(need(model, "model")?)?;
                    let ds = load_any(&need(test, "test")?)?;
                    svg::prediction_trace(&m.predict_series(&ds)?, ds.labels())?
                }
                PlotKind::Loss => {
                    if trace.is_empty() {
                        bail!(Error::Argument("plot --kind loss needs at least one --trace".into()));
                    }
                    let traces = trace.iter().map(|p| Ok((stem(p), parse_loss_trace_csv(&read(p)?)?))).collect::<Result<Vec<_>>>()?;
                    let named: Vec<(&str, &LossTrace)> = traces.iter().map(|(n, t)| (n.as_str(), t)).collect();
                    svg::loss_trace(&named)?
                }
            };
            let name = format!("{kind:?}").to_lowercase();
            let path = out.join(format!("{name}.svg"));
            write(&path, svg_text)?;
            Ok(format!("plot: kind={name} out={}", path.display()))
        }
        Command::Report { results } => {
            let mut files: Vec<PathBuf> = fs::read_dir(results)
                .with_context(|| format!("listing {}", results.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            files.retain(|p| p.to_string_lossy().ends_with(".result.csv"));
            files.sort();
            let mut rows = Vec::new();
            for f in &files {
                rows.extend(parse_results_csv(&read(f)?)?);
            }
            rows.sort_by_key(|r| (r.method, r.seed));
            let report = render_report(&rows)?;
            write(&out.join("results.csv"), results_csv(&rows))?;
            write(&out.join("report.md"), &report)?;
            Ok(format!("report: rows={} out={}", rows.len(), out.join("report.md").display()))
        }
        Command::Benchmark { seeds, methods } => {
            let mut cfg = config(cli)?;
            if let Some(s) = seeds.clone().or_else(|| cli.seed.map(|s| vec![s])) {
                cfg.seeds = s;
            }
            let methods = match methods {
                Some(names) => names.iter().map(|n| n.parse()).collect::<suda_core::Result<Vec<Method>>>()?,
                None => Method::ALL.to_vec(),
            };
            let runs = run_benchmark(&cfg, &methods, Some(out))?;
            Ok(format!("benchmark: seeds={} methods={} out={}", runs.len(), methods.len(), out.join("report.md").display()))
        }
    }
}
