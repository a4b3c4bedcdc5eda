use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use liouville::io::{self, read_snapshots, write_snapshots};
use liouville::run::{RunManifest, MANIFEST};
use liouville_core::scenarios::{builtin, builtin_scenarios, Scenario};
use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_liouville"));
    c.env_remove("LIOUVILLE_OUT_DIR").env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn liouville")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

/// The strategic scenario cut down to two snapshots and small ensembles.
fn tiny_scenario(dir: &Path) -> PathBuf {
    let mut v = serde_json::to_value(builtin("strategic_3state").unwrap()).unwrap();
    v["name"] = json!("tiny");
    v["dynamics"]["schedule"] = json!({ "start_s": 0.0, "end_s": 16.0, "snapshots_s": [8.0, 16.0] });
    v["run"] = json!({ "samples": 150, "mc_samples": [150, 300], "seed": 11 });
    let p = dir.join("tiny.json");
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

fn tiny_run(dir: &Path, extra: &[&str]) -> PathBuf {
    let scenario = tiny_scenario(dir);
    let out = dir.join("out");
    let mut args = vec!["run", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let k = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[k].parse().unwrap()).collect()
}

#[test]
fn missing_file_is_an_io_error_naming_the_path() {
    let o = run(&["validate", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "io");
    assert!(e["error"]["message"].as_str().unwrap().contains("/definitely/not/here.json"));
}

#[test]
fn negative_sigma_is_a_validation_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = serde_json::to_value(builtin("strategic_3state").unwrap()).unwrap();
    v["dynamics"]["initial"]["velocity_m_per_s"]["sigma"] = json!(-1.0);
    let p = dir.path().join("bad.json");
    fs::write(&p, v.to_string()).unwrap();
    let o = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "validation");
    assert!(e.to_string().contains("velocity_m_per_s"), "{e}");
}

#[test]
fn usage_errors_exit_with_validation_code() {
    assert_eq!(run(&["run"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_writes_every_listed_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_run(dir.path(), &[]);
    let manifest: RunManifest = io::read_json(&out.join(MANIFEST)).unwrap();
    assert_eq!(manifest.schedule, vec![8.0, 16.0]);
    assert!(manifest.errors.is_empty(), "{:?}", manifest.errors);
    assert_eq!(manifest.seeds.mc_samples.len(), 2);
    for a in &manifest.artifacts {
        assert!(out.join(a).is_file(), "missing {a}");
    }
    for want in ["snapshots/db/snapshots.json", "reports/summary.csv", "marginals/db/snapshot_000_r.csv", "marginals/db/snapshot_001_r-v.csv"] {
        assert!(manifest.artifacts.iter().any(|a| a == want), "{want} not listed");
    }
    let p = csv_column(&out.join("compliance/dynamic_pressure_above_68000.csv"), "probability");
    assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn runs_do_not_depend_on_thread_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = tiny_run(a.path(), &["--threads", "1"]);
    let ob = tiny_run(b.path(), &["--threads", "3"]);
    let ma: RunManifest = io::read_json(&oa.join(MANIFEST)).unwrap();
    for rel in ma.artifacts.iter().filter(|r| r.ends_with(".csv")) {
        let (x, y) = (fs::read(oa.join(rel)).unwrap(), fs::read(ob.join(rel)).unwrap());
        assert!(x == y, "{rel} differs");
    }
}

#[test]
fn marginal_command_axes_and_bins() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_run(dir.path(), &["--mc-samples", ""]);
    let snaps = out.join("snapshots/db");
    let m = dir.path().join("m");

    let o = run(&["marginal", snaps.to_str().unwrap(), "--axis", "nope", "--out", m.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr_json(&o).to_string().contains("gamma"));

    let o = run(&["marginal", snaps.to_str().unwrap(), "--axis", "v", "--bins", "1", "--out", m.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let values = csv_column(&m.join("marginal_000_v.csv"), "value");
    assert_eq!(values.len(), 1);
    assert!(values[0] > 0.0);

    let o = run(&["marginal", snaps.to_str().unwrap(), "--axes", "r,gamma", "--bins", "3", "--out", m.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_column(&m.join("marginal_001_r-gamma.csv"), "value").len(), 9);
}

#[test]
fn compare_identical_shifted_and_mismatched() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_run(dir.path(), &["--mc-samples", "300"]);
    let mc = out.join("snapshots/mc_300");
    let mc_s = mc.to_str().unwrap();

    let o = run(&["compare", mc_s, mc_s]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    for rec in r.records() {
        let rec = rec.unwrap();
        assert_eq!(rec[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(rec[3].parse::<f64>().unwrap(), 0.0);
    }

    // Shift every velocity by a constant: Δ_W on v equals the shift.
    let (index, mut snaps) = read_snapshots(&mc).unwrap();
    let shift = 3.5;
    for s in &mut snaps {
        for p in &mut s.samples {
            p.state[1] += shift;
        }
    }
    let shifted = dir.path().join("shifted");
    write_snapshots(&shifted, &snaps, &index.axes, &index.marginal, &index.scenario_sha256).unwrap();
    let report = dir.path().join("cmp.csv");
    let o = run(&["compare", shifted.to_str().unwrap(), mc_s, "--metric", "wasserstein", "--out", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(&report).unwrap();
    let headers = r.headers().unwrap().clone();
    let w = headers.iter().position(|h| h == "wasserstein").unwrap();
    let mut seen = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        if &rec[0] == "v" {
            assert!((rec[w].parse::<f64>().unwrap() - shift).abs() < 1e-6, "{rec:?}");
            seen += 1;
        }
    }
    assert_eq!(seen, 2);

    // Drop a snapshot: the schedules no longer match.
    let short = dir.path().join("short");
    write_snapshots(&short, &snaps[..1], &index.axes, &index.marginal, &index.scenario_sha256).unwrap();
    let o = run(&["compare", short.to_str().unwrap(), mc_s]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn scenarios_round_trip_through_json() {
    for s in builtin_scenarios() {
        let text = serde_json::to_string(&s).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(io::parse_scenario(&text).unwrap(), s);
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn shipped_scenario_files_match_builtins() {
    let dir = repo_root().join("scenarios");
    for s in builtin_scenarios() {
        let p = dir.join(format!("{}.json", s.name));
        let loaded = io::load_scenario(p.to_str().unwrap()).unwrap();
        assert_eq!(loaded, s, "{} is stale; regenerate with `liouville scenarios --write scenarios`", p.display());
    }
}

#[test]
fn shipped_schema_is_current() {
    let o = run(&["schema"]);
    assert!(o.status.success());
    let generated: Value = serde_json::from_slice(&o.stdout).unwrap();
    let shipped: Value = serde_json::from_str(&fs::read_to_string(repo_root().join("docs/scenario.schema.json")).unwrap()).unwrap();
    assert!(generated == shipped, "docs/scenario.schema.json is stale; regenerate with `liouville schema`");
}
