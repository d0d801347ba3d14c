use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const POWER_2D: &str = r#"{
  "experiment": {
    "coefficients": {"dimension": 2, "family": "power_decay", "q": 4.0},
    "bandwidth": {"gamma": 1.0},
    "n_grid": [16, 32, 64],
    "replicates": 40,
    "seed": 3
  }
}"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_fieldkde"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_conditions_reports_delta_window() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), POWER_2D, &["check-conditions"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reports = json(&dir.path().join("out/check-conditions.json"));
    let window = reports
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["check"] == "corollary1")
        .unwrap()["delta_interval"]
        .clone();
    assert!((window["lower"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(window["upper"].as_f64().unwrap(), 0.5);
    let manifest = json(&dir.path().join("out/check-conditions.manifest.json"));
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["verdicts"]["corollary1"], "pass");
}

#[test]
fn single_replicate_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), POWER_2D, &["--set", "experiment.replicates=1", "--set", "experiment.n_grid=[16]", "clt-run"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("out/clt-run.json"));
    assert_eq!(report["verdict"], "inconclusive");
    assert_eq!(report["config"]["replicates"], 1);
}

#[test]
fn memory_cap_is_an_error_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        POWER_2D,
        &["--set", "experiment.max_lattice_bytes=1024", "gen-field"],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bytes"), "{stderr}");
    let manifest = json(&dir.path().join("out/gen-field.manifest.json"));
    assert_eq!(manifest["status"], "error");
    assert!(manifest["error"].as_str().unwrap().contains("cap"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), POWER_2D, &["no-such-command"]).status.code(), Some(1));
    let out = run(dir.path(), r#"{"experiment": {"bandwidth": {"gamma": 1.0}, "n_grid": [8]}}"#, &["kde"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("coefficients"));
    let out = run(dir.path(), POWER_2D, &["--set", "experiment.replicatez=3", "kde"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicatez"));
}

#[test]
fn thread_count_does_not_change_reports() {
    let mut texts = Vec::new();
    for threads in ["1", "4"] {
        let dir = tempfile::tempdir().unwrap();
        let out = run(dir.path(), POWER_2D, &["--threads", threads, "--set", "experiment.n_grid=[16,32]", "clt-run"]);
        assert!(out.status.code() == Some(0) || out.status.code() == Some(2));
        texts.push((
            fs::read(dir.path().join("out/clt-run.json")).unwrap(),
            fs::read(dir.path().join("out/clt-run.clt_replicates.csv")).unwrap(),
        ));
    }
    assert!(texts[0] == texts[1]);
}

#[test]
fn csv_headers_and_repeatable_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    for d in [&first, &second] {
        fs::create_dir_all(d).unwrap();
        let out = run(d, POWER_2D, &["--set", "experiment.n_grid=[16,32]", "blocks"]);
        assert!(out.status.code() == Some(0) || out.status.code() == Some(2));
    }
    let header = fs::read_to_string(first.join("out/blocks.blocks.csv")).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "n,m,l,blocks_per_axis,total_blocks,b_n,delta_mean,delta_variance,rate_proxy,adjacent_correlation,correlation_bound,correlation_verdict"
    );
    for name in ["blocks.json", "blocks.blocks.csv", "blocks.lindeberg.json", "blocks.lindeberg.lindeberg.csv"] {
        assert_eq!(
            fs::read(first.join("out").join(name)).unwrap(),
            fs::read(second.join("out").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn format_flag_selects_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), POWER_2D, &["--format", "csv", "kde"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/kde.kde.csv").exists());
    assert!(!dir.path().join("out/kde.json").exists());
}

#[test]
fn gen_field_writes_coupled_binaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), POWER_2D, &["--set", "gen_field.write_csv=true", "gen-field"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let base = dir.path().join("out");
    let full = fieldkde_core::field::read_field_binary(fs::File::open(base.join("gen-field.full.bin")).unwrap()).unwrap();
    let trunc = fieldkde_core::field::read_field_binary(fs::File::open(base.join("gen-field.truncated.bin")).unwrap()).unwrap();
    let resid = fieldkde_core::field::read_field_binary(fs::File::open(base.join("gen-field.residual.bin")).unwrap()).unwrap();
    assert_eq!(full.values.len(), 16 * 16);
    for ((x, t), r) in full.values.iter().zip(&trunc.values).zip(&resid.values) {
        assert!((x - t - r).abs() <= 1e-12 * (1.0 + x.abs()));
    }
}
