//! End-to-end runs of the `plsrod` binary on the bundled and ad hoc scenarios.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BENCHMARK_FULL_CM: [f64; 3] = [5.7787, 0.0, -17.8394];
const BENCHMARK_TOL_M: f64 = 1.5e-3;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn plsrod(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plsrod"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn succeed(args: &[&str], config: &Path, out: &Path) -> Value {
    let o = plsrod(args, config, out);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn fail(args: &[&str], config: &Path, out: &Path) -> (i32, Value) {
    let o = plsrod(args, config, out);
    assert!(!o.status.success());
    (o.status.code().unwrap(), serde_json::from_slice(&o.stderr).expect("stderr is JSON"))
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

const CYLINDER: &str = r#"
[rod]
length = 0.2
base_radius = 0.008
section_ends = [0.1, 0.2]
segments = 4

[rod.material]
young_modulus = 2e5
shear_modulus = 7e4
density = 1500
"#;

#[test]
fn benchmark_compare_full_row_matches_the_published_tip() {
    let tmp = tempfile::tempdir().unwrap();
    succeed(&["compare"], &configs().join("benchmark.toml"), tmp.path());
    let table = rows(&tmp.path().join("compare.csv"));
    let full = table.iter().find(|r| r[0] == "full").expect("full row");
    let tip: Vec<f64> = full[1..4].iter().map(|s| s.parse().unwrap()).collect();
    let dist = tip.iter().zip(BENCHMARK_FULL_CM).map(|(a, b)| (a - b / 100.0).powi(2)).sum::<f64>().sqrt();
    assert!(dist <= BENCHMARK_TOL_M, "full model tip {dist:e} m from the table");
    let reported: f64 = full[7].parse().unwrap();
    assert!((reported - dist).abs() < 1e-8);
    assert_eq!(table.len(), 5);
}

#[test]
fn unloaded_straight_rod_stays_on_the_x_axis() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{CYLINDER}\n[static]\nsamples = 3\n"));
    let out = tmp.path().join("out");
    let report = succeed(&["static"], &cfg, &out);
    assert_eq!(report["summary"]["iterations"], 0);
    let line = rows(&out.join("centerline.csv"));
    assert_eq!(line.len(), 3);
    for (row, x) in line.iter().zip([0.0, 0.1, 0.2]) {
        let v: Vec<f64> = row.iter().map(|s| s.parse().unwrap()).collect();
        assert!((v[0] - x).abs() < 1e-12 && (v[1] - x).abs() < 1e-12);
        assert_eq!((v[2], v[3]), (0.0, 0.0));
    }
}

#[test]
fn synthetic_identification_recovers_the_generating_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    succeed(&["identify"], &configs().join("synthetic.toml"), tmp.path());
    let theta: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("theta.json")).unwrap()).unwrap();
    for (key, truth) in [("young_modulus", 2.5e5), ("shear_modulus", 8.5e4), ("density", 1400.0)] {
        let found = theta["theta"][key].as_f64().unwrap();
        assert!((found - truth).abs() / truth < 0.01, "{key}: {found}");
    }
    assert_eq!(theta["errors"].as_array().unwrap().len(), 6);
}

#[test]
fn synthetic_validation_reports_near_zero_errors() {
    let tmp = tempfile::tempdir().unwrap();
    succeed(&["validate"], &configs().join("synthetic.toml"), tmp.path());
    for row in rows(&tmp.path().join("validation.csv")) {
        assert_eq!(row.last().unwrap(), "ok");
        assert!(row[row.len() - 2].parse::<f64>().unwrap() < 1e-9);
    }
}

#[test]
fn reruns_produce_identical_csv_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("axial_sweep.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    succeed(&["sweep"], &cfg, &a);
    succeed(&["sweep"], &cfg, &b);
    for i in 0..5 {
        let name = format!("sweep_{i:03}.csv");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
    assert_eq!(fs::read(a.join("sweep.csv")).unwrap(), fs::read(b.join("sweep.csv")).unwrap());
}

#[test]
fn pulling_harder_lengthens_the_chord() {
    let tmp = tempfile::tempdir().unwrap();
    succeed(&["sweep"], &configs().join("axial_sweep.toml"), tmp.path());
    let chord: Vec<f64> = rows(&tmp.path().join("sweep.csv"))
        .iter()
        .map(|r| r[7..10].iter().map(|s| s.parse::<f64>().unwrap().powi(2)).sum::<f64>().sqrt())
        .collect();
    assert!(chord.windows(2).all(|w| w[1] > w[0]), "{chord:?}");
}

#[test]
fn dynamic_rollout_writes_trajectory_and_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let report = succeed(&["dynamic"], &configs().join("cable_step.toml"), tmp.path());
    assert!(report["summary"]["boundary_drift"].as_f64().unwrap() < 1e-9);
    let traj = rows(&tmp.path().join("trajectory.csv"));
    assert_eq!(traj.len(), 31);
    assert_eq!(traj[0].len(), 4 + 24);
    let energy: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("energy.json")).unwrap()).unwrap();
    assert_eq!(energy["records"].as_array().unwrap().len(), 301);
}

#[test]
fn seeded_initial_rates_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[dynamic]\ndt = 1e-3\nt_end = 0.02\nsample_every = 5\ninitial_rate = 0.5\n",
        CYLINDER.replace("density = 1500", "density = 1500\nviscosity = 20")
    );
    let cfg = write_config(tmp.path(), &text);
    let run = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        succeed(&["dynamic", "--seed", seed], &cfg, &out);
        fs::read(out.join("trajectory.csv")).unwrap()
    };
    let a = run("7", "a");
    assert_eq!(a, run("7", "b"));
    assert_ne!(a, run("8", "c"));
}

#[test]
fn discretization_flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{CYLINDER}\n[environment]\ngravity = [0, 0, -9.81]\n[static]\n");
    let cfg = write_config(tmp.path(), &text);
    let tip = |args: &[&str], dir: &str| succeed(args, &cfg, &tmp.path().join(dir))["summary"]["end_effector"].clone();
    let default = tip(&["static"], "a");
    assert_eq!(default, tip(&["static", "--segments", "4", "--quadrature", "4"], "b"));
    assert_ne!(default, tip(&["static", "--segments", "1"], "c"));
    assert_ne!(default, tip(&["static", "--quadrature", "1"], "d"));
}

#[test]
fn unknown_keys_are_config_errors_with_a_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &CYLINDER.replace("density = 1500", "density = 1500\nstiffness = 4"));
    let (code, err) = fail(&["static"], &cfg, &tmp.path().join("o"));
    assert_eq!(code, 2);
    assert_eq!(err["error"]["kind"], "config");
    assert_eq!(err["error"]["path"], "rod.material.stiffness");
    assert!(err["error"]["message"].as_str().unwrap().contains("stiffness"));
}

#[test]
fn missing_command_section_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CYLINDER);
    let (code, err) = fail(&["sweep"], &cfg, &tmp.path().join("o"));
    assert_eq!(code, 2);
    assert_eq!(err["error"]["path"], "sweep");
}

#[test]
fn inviscid_dynamics_is_a_solver_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{CYLINDER}\n[dynamic]\ndt = 1e-3\nt_end = 0.01\n"));
    let (code, err) = fail(&["dynamic"], &cfg, &tmp.path().join("o"));
    assert_eq!(code, 4);
    assert_eq!(err["error"]["kind"], "solver");
}

#[test]
fn malformed_experiment_tables_are_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.csv"), "t1,t2,x_m,y_m,z_m\n0,0,0.1,0,0\n").unwrap();
    let text = format!("{CYLINDER}\n[cables]\nangles_deg = [0, 90, 180, 270]\n[validate]\nexperiments = \"bad.csv\"\n");
    let cfg = write_config(tmp.path(), &text);
    let (code, err) = fail(&["validate"], &cfg, &tmp.path().join("o"));
    assert_eq!(code, 3);
    assert_eq!(err["error"]["kind"], "data");
}

#[test]
fn missing_config_file_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, err) = fail(&["static"], &tmp.path().join("absent.toml"), &tmp.path().join("o"));
    assert_eq!(code, 3);
    assert_eq!(err["error"]["kind"], "io");
}
