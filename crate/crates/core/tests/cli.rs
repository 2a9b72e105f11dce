use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn oodlens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oodlens")).args(args).output().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synthetic_then_layout() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("clusters");
    let o = oodlens(&["gen-synthetic", "--kind", "clusters", "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = data.join("manifest.json");
    assert!(manifest.exists());

    let out = dir.path().join("layout");
    let o = oodlens(&[
        "layout",
        manifest.to_str().unwrap(),
        "--split",
        "train",
        "--k",
        "20",
        "--baseline",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let layout = read_json(&out.join("layout.json"));
    let report = read_json(&out.join("report.json"));
    let cr = report["cr"].as_f64().unwrap();
    assert!(cr >= -1e-12, "cost ratio {cr}");
    let cells = layout["cells"].as_array().unwrap();
    let (m, n) = (layout["grid"]["m"].as_u64().unwrap(), layout["grid"]["n"].as_u64().unwrap());
    assert_eq!(cells.len() as u64, m * n);
}

#[test]
fn detect_writes_scores_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cb");
    let o = oodlens(&["gen-synthetic", "--kind", "color-bias", "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = data.join("manifest.json");
    let out = dir.path().join("run");
    let o = oodlens(&[
        "detect",
        manifest.to_str().unwrap(),
        "--n-models",
        "2",
        "--feature-sets",
        "mixed_late",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("AUROC"));
    let eval = read_json(&out.join("eval.json"));
    assert_eq!(eval["rows"][0]["method"], "M-OoD(2)");
    let scores = out.join("scores.csv");
    assert!(scores.exists());

    // re-evaluating the written scores against the dataset's flags
    let m = read_json(&manifest);
    let truth = data.join(m["ood_truth_path"].as_str().unwrap());
    let again = dir.path().join("again.json");
    let o = oodlens(&[
        "eval-ood",
        scores.to_str().unwrap(),
        truth.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let again = read_json(&again);
    assert!(again["rows"][0]["AUROC"].as_f64().unwrap() > 0.5);
}

#[test]
fn bad_input_is_one_line() {
    let o = oodlens(&["layout", "/nonexistent/manifest.json", "--out", "/tmp/x"]);
    assert!(!o.status.success());
    assert!(!stderr(&o).trim().is_empty());

    let o = oodlens(&["bench-lap", "--n", "abc"]);
    assert!(!o.status.success());
    assert_eq!(stderr(&o).trim().lines().count(), 1, "{}", stderr(&o));

    let o = oodlens(&["gen-synthetic", "--kind", "mnist", "--out", "/tmp/x"]);
    assert!(!o.status.success());
}

#[test]
fn bench_lap_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let o = oodlens(&["bench-lap", "--n", "100", "--k", "5,10", "--trials", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert!(rd.headers().unwrap().iter().any(|h| h == "cr"));
}
