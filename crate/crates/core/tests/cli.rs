use std::path::Path;
use std::process::{Command, Output};

use orbital_arm::config::RunConfig;
use orbital_arm::experiments::read_telemetry;

fn orbital_arm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbital-arm"))
        .args(args)
        .env_remove("ORBITAL_ARM_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

const SHORT: &str = "[episode]\nhorizon = 2.0\n";

#[test]
fn missing_config_file_is_a_config_error() {
    let o = orbital_arm(&["simulate", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_writes_telemetry_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out = dir.path().join("out");
    for controller in ["ntsmc", "pd", "euler"] {
        let o = orbital_arm(&["simulate", &cfg, "--controller", controller, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let rows = read_telemetry(&out.join("telemetry.csv")).unwrap();
        assert_eq!(rows.len(), 2001);
        let metrics: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
        for key in ["energy", "torque_integral", "final_position_error", "final_attitude_error"] {
            assert!(metrics[key].as_f64().unwrap().is_finite(), "{key}");
        }
    }
}

#[test]
fn seeded_simulations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SHORT}[disturbance]\ngenerator = \"velocity_quadratic\"\n"));
    let read = |tag: &str| {
        let out = dir.path().join(tag);
        let o = orbital_arm(&["simulate", &cfg, "--seed", "42", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(out.join("telemetry.csv")).unwrap(), std::fs::read(out.join("metrics.json")).unwrap())
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn single_run_campaign() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[mc]\nattitude_horizon = 1.0\n");
    let out = dir.path().join("mc");
    let o = orbital_arm(&["mc", &cfg, "--campaign", "attitude", "--runs", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"], 1);
    assert!(out.join("telemetry/run_0000_proposed.csv").exists());
}

#[test]
fn unknown_campaign_is_rejected() {
    let o = orbital_arm(&["mc", "--campaign", "thermal", "--runs", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_accepts_the_defaults() {
    let o = orbital_arm(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn invalid_parameters_name_their_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut negative_mass = RunConfig::default();
    negative_mass.model.links[2].inertia.mass = -1.0;
    let cases = [
        (negative_mass.to_toml().unwrap(), "model.links[2].inertia.mass"),
        ("[gains]\np = 7\nq = 3\n".to_owned(), "gains."),
        ("schema_version = 9\n".to_owned(), "schema_version"),
    ];
    for (body, field) in cases {
        let cfg = write_config(dir.path(), &body);
        let o = orbital_arm(&["validate", &cfg]);
        let stderr = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(2), "{body}: {stderr}");
        assert!(stderr.contains(field), "{field} missing from: {stderr}");
    }
}
