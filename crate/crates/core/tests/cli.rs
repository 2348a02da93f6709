//! The `avg` binary: exit codes, JSON envelope, output files and determinism.

use std::process::Command;

use radavg::numerics::grid::RadialGrid;
use radavg::scenario::{builtin, run_scenario, RunOptions};

fn avg(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_avg")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn scenario_list_is_versioned_json() {
    let (code, out) = avg(&["scenario", "list"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["builtins"].as_array().unwrap().len(), 6);
}

#[test]
fn exit_codes() {
    assert_eq!(avg(&["condition", "dp", "--levels", "12"]).0, 0);
    // usage, parse and domain errors
    assert_eq!(avg(&["condition"]).0, 2);
    assert_eq!(avg(&["condition", "dp", "--weight", "power_log(a=-2)"]).0, 2);
    assert_eq!(avg(&["condition", "mp", "--p", "0.5", "--levels", "12"]).0, 2);
    assert_eq!(avg(&["scenario", "run", "no-such-scenario"]).0, 2);
    // a passing check
    let (code, out) = avg(&["verify", "sandwich", "--eps", "0.5"]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn scenario_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _) = avg(&["scenario", "run", "power-basic", "--levels", "16", "--out", out]);
    assert_eq!(code, 0);
    let summary = dir.path().join("power-basic").join("summary.json");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(summary).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
    let csv = std::fs::read_to_string(dir.path().join("power-basic").join("d_p.csv")).unwrap();
    assert!(csv.starts_with("level,r,value,running_sup"));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let s = builtin("power-basic").unwrap();
    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            grid: RadialGrid::new(16, 4).unwrap(),
            out_dir: Some(dir.path().to_path_buf()),
            steps: 4,
            ..RunOptions::default()
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_scenario(&s, &opts)).unwrap();
        let d = dir.path().join("power-basic");
        (
            std::fs::read(d.join("summary.json")).unwrap(),
            std::fs::read(d.join("m_p.csv")).unwrap(),
        )
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
}
