use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_chebqr");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn chebqr(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("CHEBQR_OUT").output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = chebqr(args);
    assert!(
        out.status.success(),
        "chebqr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small, fast training flags on the engel fixture.
fn quick_train(out: &Path, model: &str, extra: &[&str]) {
    let data = fixture("engel.csv");
    let mut args = vec![
        "--out",
        p(out),
        "--seed",
        "3",
        "train",
        "--model",
        model,
        "--data",
        p(&data),
        "--hidden",
        "12",
        "--d",
        "16",
        "--epochs",
        "4",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn generate_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["--out", p(&a), "--seed", "7", "generate-data", "glasses"]);
    ok(&["--out", p(&b), "--seed", "7", "generate-data", "glasses"]);
    let csv_a = fs::read(a.join("glasses.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("glasses.csv")).unwrap());
    let (header, rows) = read_csv(&a.join("glasses.csv"));
    assert_eq!(header, ["x", "y", "split"]);
    assert_eq!(rows.len(), 6000);
    let m = json(&a.join("glasses.manifest.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["normalization"], "max-abs-y");
    assert_eq!((m["train_rows"].as_u64(), m["val_rows"].as_u64(), m["test_rows"].as_u64()), (Some(2400), Some(600), Some(3000)));
}

#[test]
fn unknown_generator_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = chebqr(&["--out", p(dir.path()), "generate-data", "housing"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("glasses"), "{err}");
}

#[test]
fn train_writes_artifacts_and_echoes_penalty() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    quick_train(&run, "iqn-p", &["--lambda", "1.0"]);
    for f in ["config.json", "checkpoint.bin", "manifest.json", "history.csv"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let cfg = json(&run.join("config.json"));
    assert_eq!(cfg["model"]["family"], "iqn-p");
    assert_eq!(cfg["model"]["penalty_weight"], 1.0);
    assert_eq!(cfg["seed"], 3);
    let m = json(&run.join("manifest.json"));
    assert_eq!(m["penalty"], "crossing");
    assert_eq!(m["config"], cfg);
    let (header, rows) = read_csv(&run.join("history.csv"));
    assert_eq!(header, ["epoch", "train_loss", "val_loss"]);
    assert_eq!(rows.len(), 5);
}

#[test]
fn ours_mean_and_q0_differ_only_in_constant_handling() {
    let dir = tempfile::tempdir().unwrap();
    let (q0, mean) = (dir.path().join("q0"), dir.path().join("mean"));
    quick_train(&q0, "ours-q0", &[]);
    quick_train(&mean, "ours-mean", &[]);
    let (a, b) = (json(&q0.join("manifest.json")), json(&mean.join("manifest.json")));
    let differing: Vec<&str> = a
        .as_object()
        .unwrap()
        .iter()
        .filter(|(k, v)| b[k.as_str()] != **v)
        .map(|(k, _)| k.as_str())
        .collect();
    for k in &differing {
        assert!(
            ["family", "constant_mode", "checkpoint_sha256", "training", "config"].contains(k),
            "unexpected manifest difference in {k}"
        );
    }
    assert_eq!(a["constant_mode"], "q0");
    assert_eq!(b["constant_mode"], "mean");
    let mut ca = a["config"].clone();
    ca["model"]["family"] = b["config"]["model"]["family"].clone();
    assert_eq!(ca, b["config"]);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    quick_train(&run, "iqn", &[]);
    let rerun = dir.path().join("rerun");
    ok(&["--out", p(&rerun), "--config", p(&run.join("config.json")), "train", "--n-tau", "4"]);
    let cfg = json(&rerun.join("config.json"));
    assert_eq!(cfg["train"]["n_tau"], 4);
    assert_eq!(cfg["model"]["family"], "iqn");
    assert_eq!(cfg["seed"], 3);
}

#[test]
fn rerun_from_echoed_config_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    quick_train(&run, "ours-q0", &[]);
    let rerun = dir.path().join("rerun");
    ok(&["--out", p(&rerun), "--config", p(&run.join("config.json")), "train"]);
    for f in ["checkpoint.bin", "manifest.json", "history.csv", "config.json"] {
        assert_eq!(fs::read(run.join(f)).unwrap(), fs::read(rerun.join(f)).unwrap(), "{f} differs");
    }
    ok(&["evaluate", "--run", p(&run)]);
    ok(&["evaluate", "--run", p(&rerun)]);
    assert_eq!(fs::read(run.join("report.json")).unwrap(), fs::read(rerun.join("report.json")).unwrap());
}

#[test]
fn evaluate_writes_report_and_fan() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    quick_train(&run, "ours-q0", &[]);
    ok(&["evaluate", "--run", p(&run), "--taus", "0.05,0.5,0.95"]);
    let (header, rows) = read_csv(&run.join("fan.csv"));
    assert_eq!(header, ["income", "foodexp", "q_0.05", "q_0.5", "q_0.95"]);
    let report = json(&run.join("report.json"));
    assert_eq!(rows.len() as u64, report["n_test"].as_u64().unwrap());
    assert_eq!(report["config"]["seed"], 3);
    assert!(report["crossing_count_roots"].is_u64());

    ok(&["evaluate", "--run", p(&run), "--grid", "980"]);
    let (header, _) = read_csv(&run.join("fan.csv"));
    assert_eq!(header.len(), 2 + 981);
    assert!(json(&run.join("report.json"))["crossing_count_grid"].is_u64());

    ok(&["evaluate", "--run", p(&run), "--grid", "roots"]);
    let (header, _) = read_csv(&run.join("fan.csv"));
    assert_eq!(header.len(), 2 + 16);
}

#[test]
fn evaluate_rejects_tampered_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    quick_train(&run, "iqn", &[]);
    let ckpt = run.join("checkpoint.bin");
    let mut bytes = fs::read(&ckpt).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&ckpt, bytes).unwrap();
    let out = chebqr(&["evaluate", "--run", p(&run)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sha256"));
}

#[test]
fn evaluate_rejects_a_different_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    quick_train(&run, "iqn", &[]);
    let other = dir.path().join("engel2.csv");
    let text = fs::read_to_string(fixture("engel.csv")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(1, 2);
    lines.pop();
    fs::write(&other, lines.join("\n") + "\n").unwrap();
    let out = chebqr(&["evaluate", "--run", p(&run), "--data", p(&other)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_aggregates_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let data = fixture("engel.csv");
    let args = [
        "--out",
        p(&out),
        "--jobs",
        "3",
        "sweep",
        "--models",
        "ours-q0,iqn",
        "--folds",
        "3",
        "--data",
        p(&data),
        "--hidden",
        "8",
        "--d",
        "8",
        "--epochs",
        "2",
    ];
    ok(&args);
    let (_, cells) = read_csv(&out.join("cells.csv"));
    assert_eq!(cells.len(), 6);
    assert!(cells.iter().all(|c| c[2] == "ok"));
    let (header, agg) = read_csv(&out.join("table_loglik.csv"));
    assert_eq!(header, ["model", "n_folds", "mean_loglik", "std_loglik"]);
    assert_eq!(agg.len(), 2);
    for row in &agg {
        let vals: Vec<f64> = cells.iter().filter(|c| c[0] == row[0]).map(|c| c[5].parse().unwrap()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let got: f64 = row[2].parse().unwrap();
        assert!((got - mean).abs() <= 1e-9 * mean.abs().max(1.0), "{got} vs {mean}");
    }
    let (_, crossings) = read_csv(&out.join("table_crossings.csv"));
    assert_eq!(crossings.len(), 2);

    let ckpt = out.join("cells/iqn-fold1/checkpoint.bin");
    let stamp = fs::metadata(&ckpt).unwrap().modified().unwrap();
    let mut resume: Vec<&str> = args.to_vec();
    resume.push("--resume");
    ok(&resume);
    assert_eq!(fs::metadata(&ckpt).unwrap().modified().unwrap(), stamp);
    let log = fs::read_to_string(out.join("sweep.log")).unwrap();
    assert_eq!(log.matches("reused").count(), 6);
}

#[test]
fn sweep_records_failed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let data = fixture("engel.csv");
    // A huge step size makes the Normal head diverge; the other cell still completes.
    ok(&[
        "--out", p(&out), "sweep", "--models", "iqn,normal", "--folds", "1", "--data", p(&data), "--hidden", "8",
        "--epochs", "3", "--lr", "1e300",
    ]);
    let (_, cells) = read_csv(&out.join("cells.csv"));
    assert_eq!(cells.len(), 2);
    let normal = cells.iter().find(|c| c[0] == "normal").unwrap();
    assert_eq!(normal[2], "failed", "{normal:?}");
    assert!(!normal[6].is_empty());
}

#[test]
fn invert_recovers_median_and_flags_out_of_support() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    quick_train(&run, "ours-q0", &[]);
    ok(&["evaluate", "--run", p(&run), "--taus", "0.5,1"]);
    let (_, fan) = read_csv(&run.join("fan.csv"));
    let mut input = String::from("income,foodexp\n");
    for r in fan.iter().take(10) {
        input.push_str(&format!("{},{}\n", r[0], r[2]));
    }
    let top: f64 = fan[0][3].parse().unwrap();
    input.push_str(&format!("{},{}\n", fan[0][0], top + 1.0));
    let path = dir.path().join("query.csv");
    fs::write(&path, input).unwrap();
    ok(&["invert", "--run", p(&run), "--input", p(&path), "--tol", "1e-8"]);
    let (header, rows) = read_csv(&run.join("invert.csv"));
    assert_eq!(header, ["row", "tau", "residual", "iterations", "status"]);
    assert_eq!(rows.len(), 11);
    for r in &rows[..10] {
        assert_eq!(r[4], "ok");
        let tau: f64 = r[1].parse().unwrap();
        assert!((tau - 0.5).abs() <= 1e-6, "tau {tau}");
        assert!(r[2].parse::<f64>().unwrap() <= 1e-8);
    }
    assert_eq!(rows[10][4], "out-of-support");
}

#[test]
fn invert_rejects_non_chebyshev_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    quick_train(&run, "iqn", &[]);
    let out = chebqr(&["invert", "--run", p(&run), "--input", p(&fixture("engel.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture("engel.csv");
    let bad_degree = chebqr(&["--out", p(dir.path()), "train", "--data", p(&data), "--d", "0"]);
    assert_eq!(bad_degree.status.code(), Some(2));

    let bad_model = chebqr(&["--out", p(dir.path()), "train", "--data", p(&data), "--model", "qrnn"]);
    assert_eq!(bad_model.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_model.stderr).contains("ours-q0"));

    let broken = dir.path().join("broken.csv");
    fs::write(&broken, "a,b\n1,2\n3,oops\n").unwrap();
    let parse = chebqr(&["--out", p(dir.path()), "train", "--data", p(&broken)]);
    assert_eq!(parse.status.code(), Some(3));
    let err = String::from_utf8_lossy(&parse.stderr);
    assert!(err.contains("line 3") || err.contains(":3"), "{err}");

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"model": {"degre": 8}}"#).unwrap();
    let unknown = chebqr(&["--out", p(dir.path()), "--config", p(&cfg), "train", "--data", p(&data)]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("degre"));
}

#[test]
fn divergence_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture("engel.csv");
    let out = chebqr(&[
        "--out", p(dir.path()), "train", "--model", "normal", "--data", p(&data), "--hidden", "8", "--epochs", "3",
        "--lr", "1e300",
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
