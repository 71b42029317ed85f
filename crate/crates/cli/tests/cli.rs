use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn kdv5(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdv5")).args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_variant(dir: &Path, base: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v = read_json(&scenario(base));
    edit(&mut v);
    let p = dir.join(base);
    std::fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

#[test]
fn b_at_one_half_is_rejected_naming_the_range() {
    let out = kdv5(&["solve", scenario("invalid-b.json").to_str().unwrap(), "--out", "/dev/null/never"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`indices`"), "{err}");
    assert!(err.contains("max{s/5 - 1/20, 2/5} < b < b* < 1/2"), "{err}");
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("broken.json");
    std::fs::write(&p, "{\n  \"name\": \"x\",\n  \"indices\": [1, 2\n}").unwrap();
    let out = kdv5(&["verify", p.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn zero_data_verify_passes_and_reports_every_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("zero-verify.json");
    let out = kdv5(&["verify", sc.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["all_pass"], Value::Bool(true));
    let report = read_json(&dir.path().join("verification.json"));
    let checks = read_json(&sc)["checks"].as_array().unwrap().clone();
    let rows = report.as_array().unwrap();
    assert_eq!(rows.len(), checks.len());
    for (row, spec) in rows.iter().zip(&checks) {
        assert_eq!(row["name"], spec["check"]);
        assert_eq!(row["tolerance"].as_f64(), spec["tolerance"].as_f64());
        for key in ["name", "value", "tolerance", "pass"] {
            assert!(row.get(key).is_some(), "missing {key}");
        }
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), checks.len());
}

#[test]
fn failing_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_variant(dir.path(), "boundary-bump.json", |v| {
        v["checks"] = serde_json::json!([{"check": "boundary_traces", "tolerance": 1e-30}]);
    });
    let out = kdv5(&["verify", p.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("FAIL boundary_traces"));
    assert_eq!(read_json(&dir.path().join("o/summary.json"))["all_pass"], Value::Bool(false));
}

#[test]
fn linear_solve_is_deterministic_and_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("linear-traces.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for o in [&a, &b] {
        let out = kdv5(&["solve", sc.to_str().unwrap(), "--out", o.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["solve_report.json", "compatibility.json", "boundary_diagnostic.json", "solution.json", "trace_0.json", "trace_2.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let env = read_json(&a.join("solution.json"));
    let nx = env["xgrid"]["count"].as_u64().unwrap() as usize;
    let nt = env["tgrid"]["count"].as_u64().unwrap() as usize;
    let (sx, st) = (env["stride_x"].as_u64().unwrap() as usize, env["stride_t"].as_u64().unwrap() as usize);
    let rows = std::fs::read_to_string(a.join(env["file"].as_str().unwrap())).unwrap().lines().count() - 1;
    assert_eq!(rows, nx.div_ceil(sx) * nt.div_ceil(st));
    let report = read_json(&a.join("solve_report.json"));
    assert!(report["iteration"].is_null());
    for e in report["trace_errors"].as_array().unwrap() {
        assert!(e.as_f64().unwrap() < 1e-10);
    }
    for j in 0..3 {
        assert!(a.join(format!("plots/trace_{j}.dat")).exists());
    }
    // 17 significant digits throughout.
    let text = std::fs::read_to_string(a.join("solve_report.json")).unwrap();
    assert!(text.contains("\"horizon\": 5.0000000000000000e-1"));
}

#[test]
fn depth_override_reaches_the_boundary_stage() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("boundary-bump.json");
    let out = kdv5(&["solve", sc.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--depth", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&dir.path().join("boundary_diagnostic.json"))["depth"], 2);
    assert_eq!(kdv5(&["solve", sc.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--depth", "0"]).status.code(), Some(2));
}

#[test]
fn probe_honours_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_variant(dir.path(), "probe-standard.json", |v| {
        v["probe"]["ensemble_size"] = 6.into();
    });
    let out = kdv5(&["probe-bilinear", p.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "--seed", "40"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(&dir.path().join("o/probe.json"));
    assert_eq!(rep["ensemble_size"], 6);
    let seed = rep["argmax_seed"].as_u64().unwrap();
    assert!((40..46).contains(&seed));
    assert!(rep["max_ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn probe_without_section_is_a_validation_error() {
    let out = kdv5(&["probe-bilinear", scenario("zero-verify.json").to_str().unwrap(), "--out", "/dev/null/never"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`probe`"));
}
