mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use carbon_faas::harness::{parse_config_str, run_experiment, ExperimentConfig, Summary};

fn config(dir: &Path, trace: &str, policy: &str, extra: &str) -> ExperimentConfig {
    let data = common::repo_root().join("data");
    let text = format!(
        r#"
[paths]
trace = "{trace}"
profiles = "{profiles}"
environment = "{env}"

[experiment]
policy = "{policy}"
seed = 11
intensity = 20
record_decision_time = false
{extra}

[output]
metrics = "metrics.csv"
summary = "summary.json"
"#,
        trace = data.join(trace).display(),
        profiles = data.join("profiles.csv").display(),
        env = data.join("environment.csv").display(),
    );
    parse_config_str(&text, dir).unwrap()
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        run_experiment(&config(dir, "mini_trace.csv", "casa", "")).unwrap();
    }
    for name in ["metrics.csv", "summary.json"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between runs");
    }
}

#[test]
fn day_summary_matches_the_metrics_file() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(dir.path(), "day_trace.csv", "casa", "gen = 100")).unwrap();
    let rows = read_rows(&dir.path().join("metrics.csv"));
    assert_eq!(rows.len(), 96);
    let col = |i: usize| -> Vec<f64> { rows.iter().map(|r| r[i].parse().unwrap()).collect() };
    let summary: Summary =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary, report.summary);
    assert_eq!(summary.epochs, 96);

    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs();
    assert!(close(col(1).iter().sum(), summary.ca_cum_g));
    assert!(close(col(2).iter().sum(), summary.co_total));
    assert!(close(col(3).iter().sum(), summary.water_carbon_g));
    assert!(close(col(4).iter().sum(), summary.energy_kwh));
    let defined: Vec<f64> = rows.iter().filter(|r| !r[5].is_empty()).map(|r| r[5].parse().unwrap()).collect();
    let sl = defined.iter().sum::<f64>() / defined.len() as f64;
    assert!((sl - summary.sl_ave).abs() <= 1e-12);
    assert!(summary.sl_ave <= 0.05);
    let epochs: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(epochs, (0..96).collect::<Vec<_>>());
    assert!(col(7).iter().all(|&d| d == 0.0));
    assert!(report.epochs.iter().all(|e| e.anytime_ok == Some(true)));
    for w in report.epochs.windows(2) {
        assert_eq!(w[0].end_state, w[1].start_state);
    }
}

#[test]
fn outputs_are_replaced_whole() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("metrics.csv"), "stale contents that are much longer than a header\n".repeat(500)).unwrap();
    fs::write(dir.path().join("summary.json"), "{").unwrap();
    run_experiment(&config(dir.path(), "mini_trace.csv", "score", "")).unwrap();
    let rows = read_rows(&dir.path().join("metrics.csv"));
    assert_eq!(rows.len(), 8);
    let text = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let summary: Summary = serde_json::from_str(&text).unwrap();
    assert_eq!(summary.policy, "score");
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 2, "leftover files: {names:?}");
}

#[test]
fn every_policy_runs_end_to_end() {
    for policy in ["casa", "score", "round_robin", "random"] {
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&config(dir.path(), "mini_trace.csv", policy, "")).unwrap();
        assert_eq!(report.rows.len(), 8, "{policy}");
        assert!(report.summary.ca_cum_g > 0.0);
    }
}

#[test]
fn cli_runs_and_reports_bad_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::repo_root().join("configs/mini.toml");
    let out = dir.path().join("m.csv");
    let summary = dir.path().join("s.json");
    let status = Command::new(env!("CARGO_BIN_EXE_carbon-faas"))
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--policy", "score", "--seed", "4", "--out"])
        .arg(&out)
        .arg("--summary")
        .arg(&summary)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let s: Summary = serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!((s.policy.as_str(), s.seed, s.epochs), ("score", 4, 8));
    assert_eq!(read_rows(&out).len(), 8);

    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(&cfg).unwrap().replace("cstr = 0.05", "cstr = 1.5");
    fs::write(&bad, text.replace("../data", &common::repo_root().join("data").display().to_string())).unwrap();
    let failed = Command::new(env!("CARGO_BIN_EXE_carbon-faas"))
        .args(["run", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!failed.status.success());
    assert!(String::from_utf8_lossy(&failed.stderr).contains("experiment.cstr"));
}
