use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn coopsim(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coopsim"));
    cmd.args(args);
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    cmd.output().expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_one_csv_per_episode_plus_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = coopsim(
        &["run", "--scenario", "coop1", "--episodes", "10"],
        Some(tmp.path()),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..10 {
        assert!(tmp.path().join(format!("episode_{i}.csv")).is_file());
    }
    assert!(!tmp.path().join("episode_10.csv").exists());
    assert!(tmp.path().join("detections.svg").is_file());
    let s = summary(tmp.path());
    assert_eq!(s["stats"]["n_total"], 10);
    assert_eq!(s["seeds"].as_array().unwrap().len(), 10);
}

#[test]
fn latency_and_drop_are_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let o = coopsim(
        &[
            "run",
            "--scenario",
            "coop2",
            "--episodes",
            "2",
            "--latency",
            "det:0.3",
            "--drop",
            "0.3",
        ],
        Some(tmp.path()),
    );
    assert!(o.status.success());
    let c = &summary(tmp.path())["config"];
    assert_eq!(c["latency_spec"], "det:0.3");
    assert_eq!(c["latency_mean_s"], 0.3);
    assert_eq!(c["drop_rate"], 0.3);
}

#[test]
fn summary_rate_matches_episode_outcomes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = coopsim(
        &[
            "run",
            "--scenario",
            "coop6",
            "--episodes",
            "12",
            "--participants",
            "vehicle",
        ],
        Some(tmp.path()),
    );
    assert!(o.status.success());
    let s = summary(tmp.path());
    let eps = s["episodes"].as_array().unwrap();
    let n_cf = eps.iter().filter(|e| e["collision"] == false).count() as u64;
    assert_eq!(s["stats"]["n_cf"].as_u64(), Some(n_cf));
    let rate = s["stats"]["success_rate"].as_f64().unwrap();
    assert_eq!(rate, (n_cf * 100) as f64 / eps.len() as f64);
    // Collided episodes report zero distance.
    for e in eps.iter().filter(|e| e["collision"] == true) {
        assert_eq!(e["min_distance"], 0.0);
    }
}

#[test]
fn csv_has_a_header_and_one_line_per_tick() {
    let tmp = tempfile::tempdir().unwrap();
    // pipeline2 with a 10 s horizon and no goal stop runs exactly 200 ticks.
    let text = coopsim::scenarios::builtin_source("pipeline2")
        .unwrap()
        .replace("timeout = 40.0", "timeout = 10.0\ngoal = false");
    let doc = tmp.path().join("short.toml");
    std::fs::write(&doc, text).unwrap();
    let out = tmp.path().join("out");
    let o = coopsim(
        &[
            "run",
            "--scenario",
            doc.to_str().unwrap(),
            "--episodes",
            "1",
        ],
        Some(&out),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("episode_0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
    assert!(csv.starts_with(&coopsim::harness::CSV_COLUMNS.join(",")));
}

#[test]
fn validate_names_the_bad_field() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.cfg");
    let text = coopsim::scenarios::builtin_source("pipeline2")
        .unwrap()
        .replace(
            "lane = \"main\", station = 45.0",
            "lane = \"nowhere\", station = 45.0",
        );
    std::fs::write(&bad, text).unwrap();
    let o = coopsim(&["validate", bad.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("agents[1].placement.lane"), "{err}");

    let good = tmp.path().join("good.toml");
    std::fs::write(&good, coopsim::scenarios::builtin_source("coop4").unwrap()).unwrap();
    let o = coopsim(&["validate", good.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn list_and_usage_errors() {
    let o = coopsim(&["list"], None);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in coopsim::scenarios::BUILTIN_NAMES {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
    assert_eq!(
        coopsim(&["run", "--scenario", "coop99"], None)
            .status
            .code(),
        Some(1)
    );
    assert_eq!(coopsim(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(
        coopsim(&["validate", "/nonexistent/x.toml"], None)
            .status
            .code(),
        Some(2)
    );
}
