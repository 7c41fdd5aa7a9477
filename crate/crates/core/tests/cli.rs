use std::path::{Path, PathBuf};

use garchnn::cli::main_with_args;
use garchnn::kv::KvDoc;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/prices.csv")
}

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["garchnn"];
    full.extend_from_slice(args);
    full.push("--quiet");
    main_with_args(full)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["no-such-command"]), 1);
    assert_eq!(run(&["fit", "--horizon", "0", "--data", s(&fixture())]), 1);
    assert_eq!(run(&["fit", "--loss", "huber"]), 1);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn data_errors_exit_two() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&["fit", "--data", "/definitely/missing.csv", "--out", s(out.path())]), 2);
    // forecasting without fitted artifacts
    assert_eq!(run(&["forecast", "--data", s(&fixture()), "--out", s(out.path())]), 2);
}

#[test]
fn simulate_is_deterministic_and_gated() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let code = run(&["simulate", "--model", "garch11", "--n", "1000", "--seed", "7", "--out", s(dir.path())]);
        assert_eq!(code, 0);
    }
    let fa = std::fs::read(a.path().join("sim_seed7.csv")).unwrap();
    assert_eq!(fa, std::fs::read(b.path().join("sim_seed7.csv")).unwrap());
    assert_eq!(String::from_utf8(fa).unwrap().lines().count(), 1001);

    let c = tempfile::tempdir().unwrap();
    let code = run(&["simulate", "--model", "garch11", "--params", "0.1,0.5,0.5", "--out", s(c.path())]);
    assert_eq!(code, 2);
    assert!(!c.path().join("sim_seed0.csv").exists());
}

#[test]
fn simulate_batch_writes_one_file_per_seed() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--model", "gjr", "--n", "300", "--seeds", "8", "--out", s(out.path())]), 0);
    for seed in 0..8 {
        assert!(out.path().join(format!("sim_seed{seed}.csv")).exists());
    }
    assert!(out.path().join("manifest.kv").exists());
    assert!(out.path().join("truth.kv").exists());
}

#[test]
fn staged_commands_chain_through_artifacts() {
    let staged = tempfile::tempdir().unwrap();
    let data = fixture();
    let common = ["--data", s(&data), "--out", s(staged.path()), "--model", "garch11", "--horizon", "1,5"];
    for cmd in ["fit", "forecast", "evaluate", "var-backtest"] {
        let mut args = vec![cmd];
        args.extend_from_slice(&common);
        assert_eq!(run(&args), 0, "{cmd}");
    }
    let metrics = std::fs::read_to_string(staged.path().join("metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("garch11,1,1D,"));
    assert!(rows[1].starts_with("garch11,5,1W,"));
    let params = KvDoc::load(staged.path().join("params_garch11.kv")).unwrap();
    assert_eq!(params.get("model"), Some("garch11"));
}

#[test]
fn evaluate_lists_every_horizon() {
    let out = tempfile::tempdir().unwrap();
    let code = run(&[
        "pipeline", "--data", s(&fixture()), "--out", s(out.path()), "--model", "gjr", "--counterpart",
    ]);
    assert_eq!(code, 0);
    let metrics = std::fs::read_to_string(out.path().join("metrics.csv")).unwrap();
    let labels: Vec<&str> = metrics.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(labels, ["1D", "3D", "1W", "2W", "1M"]);
    let manifest = KvDoc::load(out.path().join("manifest.kv")).unwrap();
    assert_eq!(manifest.get("models"), Some("gjr-nn"));
    assert_eq!(manifest.get("leakage_check"), Some("pass"));
    assert!(!std::fs::read_dir(out.path())
        .unwrap()
        .any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn equivalence_check_reports_both_fitters() {
    let out = tempfile::tempdir().unwrap();
    let code = run(&[
        "equivalence-check", "--model", "garch11", "--n", "1500", "--seeds", "2", "--loss", "n", "--out",
        s(out.path()),
    ]);
    assert_eq!(code, 0);
    let table = std::fs::read_to_string(out.path().join("equivalence_params.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("param,truth,classical_mse,counterpart_mse"));
    assert_eq!(lines.count(), 3);
    assert!(out.path().join("equivalence_forecasts.csv").exists());
}

#[test]
fn config_document_overrides_flags() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("train.kv");
    std::fs::write(&cfg, "max_epochs = 3\nlr = 0.005\n").unwrap();
    let code = run(&[
        "train", "--data", s(&fixture()), "--out", s(out.path()), "--model", "garch-lstm", "--horizon", "1",
        "--config", s(&cfg),
    ]);
    assert_eq!(code, 0);
    let manifest = KvDoc::load(out.path().join("manifest.kv")).unwrap();
    assert_eq!(manifest.get("train.max_epochs"), Some("3"));
    assert_eq!(manifest.get("train.lr"), Some("0.005"));
    let hist = std::fs::read_to_string(out.path().join("history_garch-lstm-gjr_h1.csv")).unwrap();
    assert!(hist.lines().count() <= 4);
}
