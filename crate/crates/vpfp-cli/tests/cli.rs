//! End-to-end runs of the `vpfp` binary: exit codes, output files and
//! determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn vpfp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpfp")).args(args).env("VPFP_THREADS", "1").output().expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_with_code_two() {
    let dir = scratch("usage");
    let d = dir.to_str().unwrap();
    for args in [
        vec!["--output-dir", d, "spectrum", "--xi-max", "0"],
        vec!["--output-dir", d, "validate", "--suite", "bogus"],
        vec!["--output-dir", d, "validate", "--criteria", "13"],
        vec!["--output-dir", d, "--config", "/definitely/missing.json", "spectrum"],
        vec!["--output-dir", d, "assemble", "--part", "middle"],
        vec!["--output-dir", d, "kernel-probe", "--kernel", "g7"],
    ] {
        let out = vpfp(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = scratch("bad_config");
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"spectrum": {"basis_degre": 4}}"#).unwrap();
    let out = vpfp(&["--config", cfg.to_str().unwrap(), "--output-dir", dir.to_str().unwrap(), "spectrum"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn quick_spectrum_writes_data_and_manifest() {
    let dir = scratch("spectrum");
    let out = vpfp(&["--quick", "--output-dir", dir.to_str().unwrap(), "spectrum", "--points", "12"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("eigenvalues.csv")).unwrap();
    assert!(csv.starts_with("xi,index,re,im\n"));
    // Dimension of the degree-8 basis is C(11, 3) = 165 eigenvalues per mode.
    assert_eq!(csv.lines().count(), 1 + 12 * 165);
    let m = manifest(&dir);
    assert_eq!(m["command"], "spectrum");
    assert_eq!(m["mode"], "smoke");
    assert_eq!(m["basis"]["dimension"], 165);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    for f in ["eigenvalues.csv", "gap.json", "fluid_dispersion.csv", "max_re.csv"] {
        assert!(files.contains(&f), "{f} missing from {files:?}");
        assert!(dir.join(f).exists());
    }
    let gap: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("gap.json")).unwrap()).unwrap();
    assert!(gap["beta0_hat"].as_f64().unwrap() > 0.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = scratch("det_a");
    let b = scratch("det_b");
    for dir in [&a, &b] {
        let out = vpfp(&["--output-dir", dir.to_str().unwrap(), "lowfreq", "--basis-degree", "4", "--xi", "0.05,0.2", "--times", "1,2"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["lowfreq_norms.csv", "lowfreq_summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert_eq!(manifest(&a)["config_hash"], manifest(&b)["config_hash"]);
}

#[test]
fn kernel_probe_tabulates_requested_grid() {
    let dir = scratch("kernel");
    let out = vpfp(&["--output-dir", dir.to_str().unwrap(), "kernel-probe", "--times", "0.5,2", "--kernel", "g0"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("kernel_probe.csv")).unwrap();
    // 2 times x 5 separations x 3 x 3 speeds.
    assert_eq!(csv.lines().count(), 1 + 2 * 5 * 9);
    for line in csv.lines().skip(1) {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(value >= 0.0 && value.is_finite());
    }
}

#[test]
fn passing_criterion_exits_zero() {
    let dir = scratch("validate");
    let out = vpfp(&["--output-dir", dir.to_str().unwrap(), "validate", "--criteria", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("PASS [ 1]"), "{stdout}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("validation.json")).unwrap()).unwrap();
    assert_eq!(v["outcomes"][0]["passed"], true);
}

#[test]
fn linear_only_simulation_matches_mode_semigroup() {
    let dir = scratch("simulate");
    let cfg = dir.join("sim.json");
    std::fs::write(&cfg, r#"{"simulate": {"solver": {"max_degree": 4, "rho_max": 10, "r_max": 20, "t_end": 2, "fit_window": [2, 8]}}}"#).unwrap();
    let out = vpfp(&["--config", cfg.to_str().unwrap(), "--output-dir", dir.to_str().unwrap(), "simulate", "--linear-only"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let oracle: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("linear_oracle.json")).unwrap()).unwrap();
    assert!(oracle["max_relative_deviation"].as_f64().unwrap() < 1e-6);
    let m = manifest(&dir);
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    for f in ["trajectory.bin", "trajectory.json", "decay_report.json", "weighted_norms.csv"] {
        assert!(files.contains(&f) && dir.join(f).exists(), "{f}");
    }
}
