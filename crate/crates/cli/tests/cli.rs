use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const CONFIG: &str = r#"
[[scenario]]
name = "sigma"
kind = "sigma"
[scenario.parameters]
grid = { points = 64, half_width = 8.0 }

[[scenario]]
name = "coupling-sweep"
kind = "sweep"
[scenario.parameters]
range = { from = 0.05, to = 0.4, count = 8 }
grid = { points = 32, half_width = 6.0 }

[[scenario]]
name = "pair"
kind = "feshbach"
[scenario.parameters]
system = { drude_lambda = 0.2 }
grid = { points = 32, half_width = 6.0 }
measure_gap = true

[[scenario]]
name = "groups"
kind = "combinatorics"
[scenario.parameters]
mode = "scan"
z = 2
"#;

fn vdwlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdwlab")).args(args).output().expect("binary runs")
}

fn run_config(dir: &Path, src: &str, out: &str) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, src).unwrap();
    let out = dir.join(out);
    vdwlab(&["run", cfg.to_str().unwrap(), "--jobs", "2", "--seed", "7", "--out", out.to_str().unwrap()])
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

#[test]
fn run_writes_results_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), CONFIG, "out");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let sigma = read_json(&out.join("sigma.json"));
    assert_eq!(sigma["schema_version"], 1);
    assert_eq!(sigma["status"], "ok");
    assert!((sigma["result"]["sigma"].as_f64().unwrap() - 0.0625).abs() < 2e-3);
    let csv = fs::read_to_string(out.join("coupling-sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("abscissa,method,W,residual"));
    assert_eq!(lines.count(), 24);
    let side = read_json(&out.join("coupling-sweep.json"));
    assert_eq!(side["result"]["fits"].as_array().unwrap().len(), 3);
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["scenarios"].as_array().unwrap().len(), 4);
    assert_eq!(m["failed"], 0);
    assert_eq!(m["inputs_sha256"].as_str().unwrap().len(), 64);
    assert!(m["versions"]["vdwlab_core"].is_string());
    assert!(m["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn reruns_are_identical_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_config(dir.path(), CONFIG, "a").status.success());
    assert!(run_config(dir.path(), CONFIG, "b").status.success());
    for f in ["sigma.json", "coupling-sweep.csv", "coupling-sweep.json", "pair.json", "groups.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
    let strip = |mut v: Value| {
        v["wall_seconds"] = Value::Null;
        for s in v["scenarios"].as_array_mut().unwrap() {
            s["wall_seconds"] = Value::Null;
        }
        v
    };
    let a = strip(read_json(&dir.path().join("a/manifest.json")));
    let b = strip(read_json(&dir.path().join("b/manifest.json")));
    assert_eq!(a, b);
}

#[test]
fn one_failure_does_not_stop_the_others() {
    let src = r#"
[[scenario]]
name = "too-small-cutoff"
kind = "feshbach"
[scenario.parameters]
system = { atoms = [
    { potential = "soft_coulomb1d", position = [-5.0] },
    { potential = "soft_coulomb1d", position = [5.0] },
] }
grid = { points = 40, half_width = 12.0 }
cutoff_radius = 1.0

[[scenario]]
name = "witness"
kind = "combinatorics"
[scenario.parameters]
mode = "witness"
integers = [1, 2, 3]
"#;
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), src, "out");
    assert!(!o.status.success());
    let out = dir.path().join("out");
    let w = read_json(&out.join("witness.json"));
    assert_eq!(w["status"], "ok");
    assert_eq!(w["result"]["indices"], serde_json::json!([0, 1]));
    let f = read_json(&out.join("too-small-cutoff.json"));
    assert_eq!(f["status"], "failed");
    assert!(f["error"].as_str().unwrap().contains("precondition"));
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["failed"], 1);
}

#[test]
fn empty_config_succeeds_with_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), "", "out");
    assert!(o.status.success());
    let m = read_json(&dir.path().join("out/manifest.json"));
    assert!(m["scenarios"].as_array().unwrap().is_empty());
}

#[test]
fn unknown_key_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let src = CONFIG.replace("grid = { points = 64", "sgima = 0.0625\ngrid = { points = 64");
    let o = run_config(dir.path(), &src, "out");
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sgima"), "{err}");
    assert!(!dir.path().join("out").exists(), "nothing may run before validation");
}

#[test]
fn jobs_must_be_positive() {
    let o = vdwlab(&["run", "x.toml", "--jobs", "0"]);
    assert!(!o.status.success());
}

#[test]
fn shipped_demo_config_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/demo.toml");
    let out = dir.path().join("out");
    let o = vdwlab(&["run", cfg, "--jobs", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(read_json(&out.join("manifest.json"))["scenarios"].as_array().unwrap().len(), 8);
}
