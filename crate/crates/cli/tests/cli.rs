use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn polystab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polystab"))
        .current_dir(dir)
        .env_remove("POLYSTAB_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn rank_one_config(b: f64) -> String {
    format!(
        r#"{{"model": "webster", "N": 20,
            "perturbation": {{"terms": [{{"b": {{"kind": "modal", "coefficients": [{b}]}},
                                          "c1": {{"kind": "zero"}}, "c2": {{"kind": "zero"}}}}]}},
            "check": {{"kappa": 0.1, "verify": true}}}}"#
    )
}

#[test]
fn webster_example_reproduces() {
    let tmp = TempDir::new().unwrap();
    let out = polystab(tmp.path(), &["reproduce-webster-example", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&tmp.path().join("o/webster_example.json"));
    let rows = report["comparisons"].as_array().unwrap();
    assert_eq!(rows.len(), 11);
    for r in rows {
        assert_eq!(r["pass"], true, "{r}");
        assert!(r["provenance"].is_string() && r["expected_provenance"].is_string());
    }
    assert_eq!(report["reference_window_audit"]["violations"][0][0], 2);
    assert!(report["exact_coefficient_window_audit"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn bounds_emits_certificate() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "w.json", r#"{"model": "webster"}"#);
    let out = polystab(tmp.path(), &["bounds", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    let cert = &stdout["certificate"];
    assert!(cert["kappa_max"].as_f64().unwrap() > 0.0);
    assert!(cert["provenance"]["kappa_max"].is_string());
    assert_eq!(stdout, read_json(&tmp.path().join("o/bounds.json")));
    assert!(tmp.path().join("o/bounds.csv").exists());
    assert!(fs::read_to_string(tmp.path().join("o/bounds.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn reference_windows_fail_their_audit() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "w.json", r#"{"model": "webster", "bounds": {"windows": "reference"}}"#);
    let out = polystab(tmp.path(), &["bounds", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    let report = read_json(&tmp.path().join("o/bounds.json"));
    assert!((report["certificate"]["kappa_max"].as_f64().unwrap() - 0.1712).abs() < 5e-4);
}

#[test]
fn check_flips_across_threshold() {
    let tmp = TempDir::new().unwrap();
    let probe = write_config(tmp.path(), "p.json", &rank_one_config(1.0));
    polystab(tmp.path(), &["check", "--config", &probe, "--out", "probe"]);
    let cond = &read_json(&tmp.path().join("probe/check.json"))["report"]["conditions"][0];
    // the b-side norm is linear in the coefficient
    let scale = cond["threshold"].as_f64().unwrap() / cond["measured"].as_f64().unwrap();
    for (factor, code) in [(0.99, 0), (1.01, 1)] {
        let cfg = write_config(tmp.path(), "c.json", &rank_one_config(factor * scale));
        let out = polystab(tmp.path(), &["check", "--config", &cfg, "--out", "o"]);
        assert_eq!(out.status.code(), Some(code), "factor {factor}");
    }
    let report = read_json(&tmp.path().join("o/check.json"));
    assert_eq!(report["spectrum"]["pass"], true);
    assert!(report["expanded_perturbation"]["terms"][0]["b"]["modal"].is_object());
}

#[test]
fn presets_are_expanded_and_recorded() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"model": "webster", "N": 16,
            "perturbation": {"terms": [{"b": {"kind": "sine_series", "coefficients": [0.001]},
                                         "c1": {"kind": "polynomial", "coefficients": [0.0, 0.001]},
                                         "c2": {"kind": "zero"}}]}}"#,
    );
    let out = polystab(tmp.path(), &["check", "--config", &cfg, "--out", "o", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("condition,measured,threshold,pass"));
    let report = read_json(&tmp.path().join("o/check.json"));
    let b = &report["expanded_perturbation"]["terms"][0]["b"];
    assert_eq!(b["input"]["kind"], "sine_series");
    assert_eq!(b["modal"]["coefficients"].as_array().unwrap().len(), 16);
    assert!(report["kappa_source"].as_str().unwrap().starts_with("certificate"));
}

#[test]
fn invalid_input_exits_2() {
    let tmp = TempDir::new().unwrap();
    for (i, body) in [
        r#"{"model": "webster", "a": -1}"#,
        r#"{"model": "webster", "flare": 2}"#,
        r#"{"model": "acoustic", "k": 1, "perturbation": {"b2": {"kind": "zero"}, "c1": {"kind": "zero"},
            "c2": {"kind": "zero"}, "c4": [0.1, 0.0]}}"#,
        "not json",
    ]
    .iter()
    .enumerate()
    {
        let cfg = write_config(tmp.path(), &format!("bad{i}.json"), body);
        let out = polystab(tmp.path(), &["check", "--config", &cfg, "--out", "o"]);
        assert_eq!(out.status.code(), Some(2), "{body}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert!(err["reason"].is_string() && err["message"].is_string());
    }
    let out = polystab(tmp.path(), &["sweep", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_polystab"))
        .current_dir(tmp.path())
        .env("POLYSTAB_THREADS", "many")
        .args(["reproduce-webster-example", "--out", "o"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_polystab"))
        .current_dir(tmp.path())
        .env("POLYSTAB_THREADS", "2")
        .args(["reproduce-webster-example", "--out", "o"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn identical_config_and_seed_give_identical_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "a.json",
        r#"{"model": "acoustic", "N": 32, "simulate": {"t_max": 100, "steps": 16384},
            "sweep": {"s_max": 20, "step": 0.1}}"#,
    );
    for (dir, threads) in [("r1", "1"), ("r2", "3")] {
        for cmd in ["simulate", "sweep"] {
            let out = polystab(tmp.path(), &[cmd, "--config", &cfg, "--out", dir, "--seed", "11", "--threads", threads]);
            assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stdout));
        }
    }
    for file in ["simulate.json", "simulate.csv", "simulate.svg", "sweep.json", "sweep.csv", "sweep.svg"] {
        let a = fs::read(tmp.path().join("r1").join(file)).unwrap();
        let b = fs::read(tmp.path().join("r2").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    polystab(tmp.path(), &["simulate", "--config", &cfg, "--out", "r3", "--seed", "12"]);
    assert_ne!(
        fs::read(tmp.path().join("r1/simulate.csv")).unwrap(),
        fs::read(tmp.path().join("r3/simulate.csv")).unwrap()
    );
}

#[test]
fn rectangle_viscous_sweep_is_bounded() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "r.json",
        r#"{"model": "rectangle", "N": 20, "damping": {"kind": "viscous_rect", "profile": {"kind": "constant", "value": 1.0}},
            "sweep": {"s_max": 20, "step": 0.1}, "plot": false}"#,
    );
    let out = polystab(tmp.path(), &["sweep", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&tmp.path().join("o/sweep.json"));
    // constant damping d shifts every eigenvalue to real part -d/2; the
    // resolvent peak stays near 2/d instead of growing with s
    assert!((report["spectrum"]["max_real"].as_f64().unwrap() + 0.5).abs() < 1e-9);
    assert!(report["max"][1].as_f64().unwrap() < 2.5);
    assert!(!tmp.path().join("o/sweep.svg").exists());
}
