use std::process::Command;

use act_core::measure::Shots;
use act_core::runner::{run_benchmark, RunConfig, SweepConfig, TrialOptions, CSV_HEADER};
use act_core::schemes::SchemeKind;

fn act() -> Command {
    Command::new(env!("CARGO_BIN_EXE_act"))
}

#[test]
fn sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("run");
    let out = act()
        .args(["--dim", "4", "--rank", "1,2", "--scheme", "act,rp", "--shots", "exact", "--trials", "2", "--seed", "5"])
        .arg("--out")
        .arg(&stem)
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 4, "{stdout}");

    let mut reader = csv::Reader::from_path(stem.with_extension("csv")).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert!(!rows.is_empty());
    for row in &rows {
        assert!(["act", "rp"].contains(&&row[0]));
        assert_eq!(&row[1], "4");
        let s: f64 = row[5].parse().unwrap();
        assert!((0.0..=1.0 + 1e-9).contains(&s));
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
    for key in ["version", "config", "trials", "failures", "aggregates"] {
        assert!(manifest.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(manifest["config"]["base"]["seed"], 5);
    assert_eq!(manifest["trials"].as_array().unwrap().len(), 8);
    assert_eq!(manifest["aggregates"].as_array().unwrap().len(), 4);
    let steps: usize = manifest["trials"].as_array().unwrap().iter().map(|t| t["steps"].as_array().unwrap().len()).sum();
    assert_eq!(steps, rows.len());
}

#[test]
fn invalid_configurations_fail() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--dim", "4", "--rank", "5"],
        vec!["--dim", "6", "--scheme", "pact"],
        vec!["--dim", "4", "--epsilon", "1.5"],
        vec!["--dim", "4", "--shots", "lots"],
    ] {
        let out = act().args(&args).arg("--out").arg(dir.path().join("x")).output().unwrap();
        assert!(!out.status.success(), "{args:?} succeeded");
        assert_ne!(out.status.code(), Some(0));
    }
}

fn without_timings(mut v: serde_json::Value) -> serde_json::Value {
    for t in v["trials"].as_array_mut().unwrap() {
        for s in t["steps"].as_array_mut().unwrap() {
            s["elapsed"] = serde_json::Value::Null;
        }
    }
    v
}

#[test]
fn benchmarks_are_reproducible_from_the_seed() {
    let mut cfg = RunConfig::new(4, 1, SchemeKind::Act);
    cfg.shots = Shots::Finite(2_000);
    cfg.trials = 2;
    cfg.seed = 17;
    let sweep = SweepConfig { base: cfg, ranks: vec![1, 2], schemes: vec![SchemeKind::Act, SchemeKind::RandomPauli] };
    let run = || without_timings(serde_json::to_value(run_benchmark(&sweep, &TrialOptions::default()).unwrap()).unwrap());
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let mut other = sweep.clone();
    other.base.seed = 18;
    let c = without_timings(serde_json::to_value(run_benchmark(&other, &TrialOptions::default()).unwrap()).unwrap());
    assert_ne!(a["trials"], c["trials"]);
}
