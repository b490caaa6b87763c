use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_c2poly");

fn config(kind_and_params: &str) -> String {
    format!(
        r#"{{"schema_version": 1, "seed": 11, "domain": {{"kind": "disk", "radius": 1.0}}, "experiment": {{{kind_and_params}}}}}"#
    )
}

fn run_in(dir: &Path, cfg: &str, extra: &[&str]) -> Output {
    fs::write(dir.join("cfg.json"), cfg).unwrap();
    Command::new(BIN)
        .current_dir(dir)
        .args(["--config", "cfg.json", "--out", "out"])
        .args(extra)
        .output()
        .unwrap()
}

fn report_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir.join("out"))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

const EXPERIMENTS: [&str; 7] = [
    r#""kind": "net", "delta": 0.4, "interior": 20000"#,
    r#""kind": "partition", "delta": 0.4, "samples": 100000"#,
    r#""kind": "mz", "n": 2, "p": [1, 2, "inf"], "deltas": [0.8, 0.4], "trials": 10, "samples": 100000"#,
    r#""kind": "cubature", "n": 2, "delta": 0.8, "samples": 100000"#,
    r#""kind": "bernstein", "r": 1, "j": 0, "l": 0, "p": "inf", "n_grid": [2, 4, 8, 16], "samples": 2"#,
    r#""kind": "parabola-check", "patch": {"coeffs": [1.25, 0.1, -0.4, 0.1], "base": 0.2, "l": 1.5, "m": 1.25}, "grid": 40, "probes": 500, "inverse_points": 200"#,
    r#""kind": "decompose", "base": 0.2"#,
];

#[test]
fn reports_are_identical_across_thread_counts() {
    for exp in EXPERIMENTS {
        let cfg = config(exp);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run_in(a.path(), &cfg, &["--threads", "1"]);
        let rb = run_in(b.path(), &cfg, &["--threads", "4"]);
        assert!(ra.status.success() && rb.status.success(), "{exp}: {}", String::from_utf8_lossy(&ra.stderr));
        let (fa, fb) = (report_files(a.path()), report_files(b.path()));
        assert_eq!(fa.len(), 2, "{exp}");
        assert!(fa == fb, "{exp}: reports differ");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let cfg = config(EXPERIMENTS[2]);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_in(a.path(), &cfg, &["--seed", "11"]).status.success());
    assert!(run_in(b.path(), &cfg, &["--seed", "12"]).status.success());
    assert_ne!(report_files(a.path()), report_files(b.path()));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(b.path().join("out/mz.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 12);
}

#[test]
fn mz_report_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(r#""kind": "mz", "n": 4, "p": [2], "deltas": [0.8], "trials": 5, "samples": 100000"#);
    assert!(run_in(dir.path(), &cfg, &[]).status.success());
    let csv = fs::read_to_string(dir.path().join("out/mz.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("p,delta,trial,ratio"));
    assert_eq!(lines.count(), 5);
    assert!(!csv.contains('\r'));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/mz.json")).unwrap()).unwrap();
    assert!(summary["summary"]["results"][0].get("empirical_delta0").is_some());
    assert_eq!(summary["config"]["experiment"]["n"], 4);
    assert!(summary["version"].as_str().unwrap().starts_with('v'));
}

#[test]
fn cubature_reports_t_star() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), &config(EXPERIMENTS[3]), &[]).status.success());
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/cubature.json")).unwrap()).unwrap();
    assert!(summary["summary"]["t_star"].as_f64().unwrap() >= 0.25);
}

#[test]
fn unknown_key_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(r#""kind": "decompose", "base": 0.2, "foo": 1"#);
    let out = run_in(dir.path(), &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("foo"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // A below the curvature bound M
    let cfg = config(r#""kind": "parabola-check", "patch": {"coeffs": [1.25, 0.1, -0.4, 0.1], "base": 0.2, "l": 1.5, "m": 1.25}, "a": 1.0"#);
    let out = run_in(dir.path(), &cfg, &[]);
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "numerical");
}

#[test]
fn lists_experiments() {
    let out = Command::new(BIN).arg("--list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for kind in ["net", "partition", "mz", "cubature", "bernstein", "parabola-check", "decompose"] {
        assert!(text.lines().any(|l| l.starts_with(kind)), "{kind}");
    }
}
