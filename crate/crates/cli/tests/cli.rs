//! CLI behavior: determinism, exit codes, report structure.

use std::fs;
use std::process::Command;

use nhmc_cli::{parse_config, run_experiment, ConfigError, RunOptions};

fn run_to_dir(config: &str, dir: &std::path::Path, seed: Option<u64>, workers: Option<usize>) {
    let options = RunOptions { out_dir: dir.to_path_buf(), seed, workers };
    run_experiment(config, &options).unwrap();
}

#[test]
fn rerun_is_byte_identical() {
    let config = r#"{
        "kind": "counterexample",
        "n": 5,
        "grid_points": 16,
        "seed": 9,
        "replications": 500
    }"#;
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_to_dir(config, &a, None, None);
    run_to_dir(config, &b, None, None);
    let ra = fs::read(a.join("report.json")).unwrap();
    let rb = fs::read(b.join("report.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn worker_count_does_not_change_bytes() {
    let config = r#"{
        "kind": "decompose",
        "instance": {"source": "random", "seed": 4, "states": 3, "n": 6, "m": 1}
    }"#;
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("w1");
    let b = tmp.path().join("w4");
    run_to_dir(config, &a, None, Some(1));
    run_to_dir(config, &b, None, Some(4));
    assert_eq!(
        fs::read(a.join("report.json")).unwrap(),
        fs::read(b.join("report.json")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("decomposition.csv")).unwrap(),
        fs::read(b.join("decomposition.csv")).unwrap()
    );
}

#[test]
fn seed_override_lands_in_report() {
    let config = r#"{"kind": "coeff", "pairs": 5, "max_states": 4}"#;
    let tmp = tempfile::tempdir().unwrap();
    let options =
        RunOptions { out_dir: tmp.path().to_path_buf(), seed: Some(99), workers: None };
    let outcome = run_experiment(config, &options).unwrap();
    assert_eq!(outcome.report.seed, 99);
    assert_eq!(outcome.report.config_text, config);
}

#[test]
fn report_embeds_verbatim_config_and_version() {
    let config = r#"{"kind": "counterexample", "n": 4}"#;
    let tmp = tempfile::tempdir().unwrap();
    let options = RunOptions { out_dir: tmp.path().to_path_buf(), seed: None, workers: None };
    let outcome = run_experiment(config, &options).unwrap();
    let body: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&outcome.report_path).unwrap()).unwrap();
    assert_eq!(body["config_text"].as_str().unwrap(), config);
    assert_eq!(body["version"].as_str().unwrap(), env!("CARGO_PKG_VERSION"));
    assert_eq!(body["kind"].as_str().unwrap(), "counterexample");
    assert!(body["metrics"]["degenerate"].as_bool().unwrap());
}

#[test]
fn parse_rejects_unknown_and_malformed() {
    assert!(matches!(parse_config("{"), Err(ConfigError::Json(_))));
    match parse_config(r#"{"kind": "nope"}"#) {
        Err(ConfigError::Invalid(v)) => assert!(v[0].contains("allowed kinds")),
        other => panic!("unexpected: {other:?}"),
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_nhmc");
    let tmp = tempfile::tempdir().unwrap();

    // Valid run: exit 0.
    let good = tmp.path().join("good.json");
    fs::write(&good, r#"{"kind": "counterexample", "n": 4}"#).unwrap();
    let out = Command::new(bin)
        .args(["counterexample", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(tmp.path().join("out0"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // Invalid config: exit 2.
    let bad = tmp.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"kind": "inventory", "c": 0.95, "c_h": 0.2, "c_p": 0.9,
             "demand": {"kind": "uniform", "j": 1.0}, "n": 5}"#,
    )
    .unwrap();
    let out = Command::new(bin)
        .args(["inventory", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(tmp.path().join("out1"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Kind mismatch between config and subcommand: exit 2.
    let out = Command::new(bin)
        .args(["altsub", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(tmp.path().join("out2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Missing config file: exit 3.
    let out = Command::new(bin)
        .args(["coeff", "--config"])
        .arg(tmp.path().join("missing.json"))
        .arg("--out")
        .arg(tmp.path().join("out3"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn example_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            let text = fs::read_to_string(&path).unwrap();
            parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 8, "expected the shipped example configs, found {seen}");
}
