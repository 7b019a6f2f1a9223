//! End-to-end checks of the command-line contract: exit codes, artifacts
//! and plot outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn subsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn short_scenario(dir: &Path) -> PathBuf {
    let text =
        std::fs::read_to_string(assets().join("scenarios/depth_keeping_l1.json")).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    cfg["sim"]["duration"] = serde_json::json!(20.0);
    cfg["coefficients"] = serde_json::json!(assets()
        .join("coefficients/bb2_reference.json")
        .display()
        .to_string());
    let path = dir.join("short.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn validate_accepts_bundled_scenarios() {
    for name in [
        "depth_keeping_pd.json",
        "depth_keeping_l1.json",
        "turning_circle_100m.json",
        "turning_circle_15m.json",
        "canyon_pf.json",
        "canyon_tt.json",
        "wave_demo.json",
    ] {
        let out = subsim(&[
            "validate",
            assets().join("scenarios").join(name).to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn validate_reports_missing_coefficients_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        std::fs::read_to_string(assets().join("scenarios/depth_keeping_pd.json")).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    cfg["coefficients"] = serde_json::json!("does_not_exist.json");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = subsim(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("does_not_exist.json"), "{stderr}");
}

#[test]
fn validate_names_mesh_orientation_failure() {
    let dir = tempfile::tempdir().unwrap();
    // flipped-normal tetrahedron: valid topology, inward orientation
    let mesh = "\
4 4
0 0 0
1 0 0
0 1 0
0 0 1
0 1 2
0 3 1
0 2 3
1 3 2
";
    std::fs::write(dir.path().join("flipped.mesh"), mesh).unwrap();
    let text =
        std::fs::read_to_string(assets().join("scenarios/depth_keeping_pd.json")).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    cfg["coefficients"] = serde_json::json!(assets()
        .join("coefficients/bb2_reference.json")
        .display()
        .to_string());
    cfg["mesh"] = serde_json::json!({"file": "flipped.mesh"});
    let path = dir.path().join("bad_mesh.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = subsim(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("orient") || stderr.contains("closed"),
        "stderr should name the mesh defect: {stderr}"
    );
}

#[test]
fn run_writes_artifacts_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_scenario(dir.path());
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let r1 = subsim(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        out1.to_str().unwrap(),
    ]);
    assert!(r1.status.success(), "{}", String::from_utf8_lossy(&r1.stderr));
    for f in ["log.csv", "metrics.json", "manifest.json"] {
        assert!(out1.join(f).exists(), "{f} missing");
    }
    let header = std::fs::read_to_string(out1.join("log.csv"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, subsim_core::sim_engine::CSV_COLUMNS.join(","));

    let r2 = subsim(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(r2.status.success());
    let a = std::fs::read(out1.join("log.csv")).unwrap();
    let b = std::fs::read(out2.join("log.csv")).unwrap();
    assert_eq!(a, b, "reruns must be byte-identical");
}

#[test]
fn l1_override_changes_manifest_hash() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_scenario(dir.path());
    let out_on = dir.path().join("on");
    let out_off = dir.path().join("off");
    assert!(subsim(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        out_on.to_str().unwrap(),
    ])
    .status
    .success());
    assert!(subsim(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        out_off.to_str().unwrap(),
        "--l1",
        "off",
    ])
    .status
    .success());
    let hash = |p: &Path| {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p.join("manifest.json")).unwrap())
                .unwrap();
        v["config_sha256"].as_str().unwrap().to_string()
    };
    assert_ne!(hash(&out_on), hash(&out_off));
}

#[test]
fn batch_runs_scenarios_in_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let s1 = short_scenario(dir.path());
    let s2 = dir.path().join("short2.json");
    std::fs::copy(&s1, &s2).unwrap();
    let out = dir.path().join("batch");
    let r = subsim(&[
        "batch",
        s1.to_str().unwrap(),
        s2.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("short/log.csv").exists());
    assert!(out.join("short2/log.csv").exists());
}

#[test]
fn metrics_and_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_scenario(dir.path());
    let out = dir.path().join("run");
    assert!(subsim(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
    .status
    .success());
    let log = out.join("log.csv");

    let m = subsim(&["metrics", log.to_str().unwrap()]);
    assert!(m.status.success());
    let parsed: serde_json::Value =
        serde_json::from_slice(&m.stdout).expect("metrics output is JSON");
    assert!(parsed["depth_error_rms"].is_number());

    let p = subsim(&[
        "plot",
        log.to_str().unwrap(),
        "--channels",
        "depth,track",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
    let svg = std::fs::read_to_string(out.join("depth.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("config_sha256"), "provenance comment missing");
    assert!(out.join("track.svg").exists());

    // plotting twice is deterministic
    let before = std::fs::read(out.join("depth.svg")).unwrap();
    assert!(subsim(&[
        "plot",
        log.to_str().unwrap(),
        "--channels",
        "depth",
        "--out",
        out.to_str().unwrap(),
    ])
    .status
    .success());
    assert_eq!(before, std::fs::read(out.join("depth.svg")).unwrap());
}

#[test]
fn plot_rejects_unknown_channel_listing_available() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_scenario(dir.path());
    let out = dir.path().join("run");
    assert!(subsim(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
    .status
    .success());
    let p = subsim(&[
        "plot",
        out.join("log.csv").to_str().unwrap(),
        "--channels",
        "bogus",
    ]);
    assert_eq!(p.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&p.stderr);
    assert!(stderr.contains("unknown channel"), "{stderr}");
    assert!(stderr.contains("gamma-rate"), "available channels listed: {stderr}");
}

#[test]
fn plot_empty_log_errors_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.csv");
    std::fs::write(&log, format!("{}\n", subsim_core::sim_engine::CSV_COLUMNS.join(","))).unwrap();
    let p = subsim(&["plot", log.to_str().unwrap(), "--channels", "depth"]);
    assert_eq!(p.status.code(), Some(1));
    assert!(!dir.path().join("depth.svg").exists());
}

#[test]
fn run_honors_scenario_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_scenario(dir.path());
    let text = std::fs::read_to_string(&scenario).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    let out = dir.path().join("from_scenario");
    cfg["output_dir"] = serde_json::json!(out.display().to_string());
    std::fs::write(&scenario, cfg.to_string()).unwrap();
    assert!(subsim(&["run", scenario.to_str().unwrap()]).status.success());
    assert!(out.join("log.csv").exists());
}
