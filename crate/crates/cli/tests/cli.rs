use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use suda_core::data::load_csv;
use suda_core::eval::{adapt, evaluate, BenchmarkConfig, SudaConfig};
use suda_core::{RegressorConfig, TrainConfig};

fn suda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_suda")).args(args).output().expect("running suda")
}

fn ok(args: &[&str]) -> String {
    let o = suda(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/elbow_bend.bvh")
}

/// A benchmark config small enough to train in about a second.
fn tiny_config(dir: &Path) -> PathBuf {
    let cfg = BenchmarkConfig {
        source_frames: 3000,
        target_frames: 1500,
        suda: SudaConfig {
            bins: 40,
            proxies: 40,
            regressor: RegressorConfig { window: 3, fc1_out: 4, lstm_layers: 1, lstm_hidden: 4, fc2_out: 4, ..RegressorConfig::default() },
            train: TrainConfig { lr0: 1e-2, epochs: 2, ..TrainConfig::default() },
        },
        seeds: vec![0],
        ..BenchmarkConfig::default()
    };
    let path = dir.join("tiny.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    path
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = suda(&["adapt", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(suda(&[]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_a_machine_readable_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = suda(&["eval", "--model", "/nonexistent.model", "--test", "/nonexistent.csv", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.starts_with("error: kind=io "), "{err}");

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "frame,x,y\n0,1,2\n").unwrap();
    let o = suda(&["fit-support", "--data", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error: kind=schema "));

    let o = suda(&["baseline", "--method", "suda", "--source", "a", "--target", "b", "--out", out]);
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error: kind=argument "));
}

#[test]
fn bvh_angle_writes_one_row_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let line = ok(&[
        "bvh-angle", "--file", f.to_str().unwrap(), "--parent", "RightShoulder", "--vertex", "RightElbow", "--child", "RightWrist", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(line.starts_with("bvh-angle: frames=5 min=90.000000 max=180.000000"), "{line}");
    let csv = fs::read_to_string(dir.path().join("elbow_bend.angles.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let o = suda(&["bvh-angle", "--file", f.to_str().unwrap(), "--parent", "RightShoulder", "--vertex", "Nope", "--child", "RightWrist"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn workflow_matches_the_library_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg_path = tiny_config(d);
    let cfg = cfg_path.to_str().unwrap();
    let data = d.join("data");
    let p = |name: &str| data.join(name).to_str().unwrap().to_string();
    let s = |path: &Path| path.to_str().unwrap().to_string();

    let line = ok(&["simulate", "--config", cfg, "--seed", "3", "--out", &s(&data)]);
    assert_eq!(line.trim(), format!("simulate: seed=3 source=3000 target=1050 test=450 out={}", data.display()));

    let models = d.join("models");
    ok(&["adapt", "--config", cfg, "--seed", "3", "--source", &p("source.csv"), "--target", &p("target.csv"), "--out", &s(&models)]);
    let model = models.join("suda-seed3.model");
    let eval = ok(&["eval", "--config", cfg, "--seed", "3", "--method", "suda", "--model", &s(&model), "--test", &p("target_test.csv"), "--out", &s(&d.join("results"))]);

    let bench = BenchmarkConfig::from_toml(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    let a = adapt(&load_csv(p("source.csv"), true).unwrap(), &load_csv(p("target.csv"), false).unwrap(), &bench.suda, 3).unwrap();
    assert_eq!(fs::read_to_string(&model).unwrap(), a.model.to_text());
    let mae = evaluate(&a.model, &load_csv(p("target_test.csv"), true).unwrap()).unwrap();
    assert_eq!(eval.trim(), format!("eval: mae={mae}"));

    ok(&["baseline", "--config", cfg, "--seed", "3", "--method", "coral", "--source", &p("source.csv"), "--target", &p("target.csv"), "--out", &s(&models)]);
    let trace = fs::read_to_string(models.join("coral-seed3.trace.csv")).unwrap();
    assert!(trace.starts_with("epoch,supervised_loss,transfer_loss\n1,"));
    assert_eq!(trace.lines().count(), 3);

    ok(&["train", "--config", cfg, "--seed", "3", "--data", &p("target_train_labeled.csv"), "--out", &s(&models)]);
    ok(&["eval", "--config", cfg, "--seed", "3", "--method", "supervised", "--model", &s(&models.join("supervised-seed3.model")), "--test", &p("target_test.csv"), "--out", &s(&d.join("results"))]);
    let line = ok(&["report", "--results", &s(&d.join("results")), "--out", &s(d)]);
    assert!(line.starts_with("report: rows=2"));
    let report = fs::read_to_string(d.join("report.md")).unwrap();
    assert!(report.contains("| SuDA |") && report.contains("| Supervised (target labels) |"));

    // Re-running a step reproduces its artifact exactly.
    let again = d.join("again");
    ok(&["adapt", "--config", cfg, "--seed", "3", "--source", &p("source.csv"), "--target", &p("target.csv"), "--out", &s(&again)]);
    assert_eq!(fs::read(again.join("suda-seed3.model")).unwrap(), fs::read(&model).unwrap());

    let line = ok(&["register", "--config", cfg, "--source", &p("source.csv"), "--target", &p("target.csv"), "--out", &s(d)]);
    assert!(line.starts_with("register: frames=3000 proxies=41 "), "{line}");
    let pseudo = load_csv(d.join("pseudo.csv"), true).unwrap();
    assert_eq!((pseudo.frames(), pseudo.labels()), (a.pseudo.frames(), a.pseudo.labels()));
    let line = ok(&["fit-support", "--config", cfg, "--data", &p("source.csv"), "--out", &s(d)]);
    assert!(line.starts_with("fit-support: proxies=41 "), "{line}");
    let line = ok(&["evidence", "--config", cfg, "--source", &p("source.csv"), "--target", &p("target_train_labeled.csv"), "--out", &s(d)]);
    assert!(line.starts_with("evidence: k=20 "), "{line}");
    assert!(d.join("evidence.csv").exists() && d.join("evidence.svg").exists());

    for (kind, extra) in [
        ("support", vec!["--source", "source.csv", "--target", "target.csv"]),
        ("registration", vec!["--source", "source.csv", "--target", "target.csv"]),
        ("evidence", vec!["--source", "source.csv", "--target", "target_test.csv"]),
        ("prediction", vec!["--test", "target_test.csv"]),
        ("loss", vec![]),
    ] {
        let mut args: Vec<String> = vec!["plot".into(), "--config".into(), cfg.into(), "--kind".into(), kind.into(), "--out".into(), s(&d.join("plots"))];
        for pair in extra.chunks(2) {
            args.push(pair[0].into());
            args.push(p(pair[1]));
        }
        match kind {
            "prediction" => args.extend(["--model".into(), s(&model)]),
            "loss" => args.extend(["--trace".into(), s(&models.join("coral-seed3.trace.csv")), "--trace".into(), s(&models.join("suda-seed3.trace.csv"))]),
            _ => {}
        }
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&refs);
        let svg = fs::read_to_string(d.join("plots").join(format!("{kind}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"), "{kind}");
    }
    let o = suda(&["plot", "--kind", "loss", "--out", &s(d)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn benchmark_and_sweep_commands_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg_path = tiny_config(d);
    let cfg = cfg_path.to_str().unwrap();
    let out = d.join("bench");
    let line = ok(&["benchmark", "--config", cfg, "--methods", "suda,source-only", "--out", out.to_str().unwrap()]);
    assert!(line.starts_with("benchmark: seeds=1 methods=2"), "{line}");
    for f in ["benchmark.toml", "results.csv", "report.md", "models/suda-seed0.model", "traces/source-only-seed0.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let out = d.join("sweep");
    ok(&["sweep", "--config", cfg, "--sizes", "1000,3000", "--seeds", "0", "--out", out.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("size,seed,mae\n1000,0,"));
    assert!(fs::read_to_string(out.join("sweep.md")).unwrap().contains("| 3000 |"));
}
