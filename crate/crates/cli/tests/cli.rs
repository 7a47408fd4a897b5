use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kreinamo(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kreinamo"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("KREINAMO_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).expect("stderr is JSON")
}

const SWEEP: &str = r#"{
  "family": { "kind": "constant" },
  "range": [0.0, 6.0],
  "steps": 7,
  "bc": { "kind": "idealized_dirichlet", "l": 0 },
  "M": 40,
  "track": 4
}"#;

#[test]
fn mesh_writes_branches_and_crossings() {
    let dir = tempfile::tempdir().unwrap();
    let o = kreinamo(&["mesh", "--l", "0", "--alpha0-max", "25", "--n-max", "6"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = String::from_utf8(o.stdout).unwrap();
    assert!(summary.starts_with("mesh: l=0 12 branches"), "{summary}");
    let csv = fs::read_to_string(dir.path().join("mesh.csv")).unwrap();
    assert!(csv.starts_with("kind,n,eps,m,delta,alpha0,lambda,j\n"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("branch,")).count(), 12 * 101);
    // (2,+)x(1,-) sits at alpha0 = pi, lambda = -2 pi^2.
    assert!(csv.lines().any(|l| l.starts_with("dp,2,+,1,-,3.14159265358979")), "{csv}");
    let svg = fs::read_to_string(dir.path().join("mesh.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 12);
}

#[test]
fn spectrum_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.json", SWEEP);
    let first = kreinamo(&["spectrum", "--config", &cfg], dir.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let a = fs::read(dir.path().join("branches.csv")).unwrap();
    let second = kreinamo(&["spectrum", "--config", &cfg], dir.path());
    assert!(second.status.success());
    assert_eq!(a, fs::read(dir.path().join("branches.csv")).unwrap());
    assert!(dir.path().join("branch_points.csv").exists());
    let svg = fs::read_to_string(dir.path().join("spectrum.svg")).unwrap();
    assert!(svg.contains("Im λ ≥ 0") && !svg.contains("href"));
    assert_eq!(String::from_utf8(first.stdout).unwrap().lines().count(), 1);
}

#[test]
fn grid_override_reaches_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.json", SWEEP);
    let o = kreinamo(&["spectrum", "--config", &cfg, "--M", "24", "--workers", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("branches.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",24")), "{csv}");
}

#[test]
fn config_errors_exit_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = kreinamo(&["spectrum"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "config");

    let bad = write_config(dir.path(), "bad.json", &SWEEP.replace("\"track\"", "\"tracks\""));
    let o = kreinamo(&["spectrum", "--config", &bad], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("tracks"));

    let backwards = write_config(dir.path(), "back.json", &SWEEP.replace("[0.0, 6.0]", "[6.0, 0.0]"));
    let o = kreinamo(&["spectrum", "--config", &backwards], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "invalid_input");

    let cutoff = write_config(dir.path(), "cutoff.json", r#"{"profile": {"variant": "constant", "alpha0": 0.0}, "l": 0, "X": [5.0, 10.0, 20.0], "modes": 3}"#);
    let o = kreinamo(&["cutoff", "--config", &cutoff, "--M", "100"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = kreinamo(&["selftest", "--only", "11"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn triple_reports_a_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "triple.json",
        r#"{"zeta": [0.3, 0.6], "C": [0.7, 1.0], "bc": {"kind": "physical_vacuum", "l": 1}, "M": 40, "grid": 4}"#,
    );
    let o = kreinamo(&["triple", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("triple.json")).unwrap()).unwrap();
    for key in ["zeta", "C", "residual", "found"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("triple: "));
}

#[test]
fn unfold_and_resonance_on_a_coarse_grid() {
    let dir = tempfile::tempdir().unwrap();
    let phi = r#"{"variant": "fourier", "alpha0": 0.0, "terms": [{"kind": "cos", "k": 1, "amplitude": 1.0}]}"#;
    let cfg = write_config(dir.path(), "u.json", &format!(r#"{{"phi": {phi}, "n_max": 3, "amplitude": 0.05, "M": 80}}"#));
    let o = kreinamo(&["unfold", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(dir.path().join("unfold.csv")).unwrap().lines().count();
    let o = kreinamo(&["resonance", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(dir.path().join("resonance.csv")).unwrap().lines().count(), rows);
    assert!(dir.path().join("resonance.svg").exists());
}

#[test]
fn soliton_branch_and_cutoff() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "b.json", r#"{"l": [0], "x0_min": 0.25, "x0_max": 1.5, "steps": 6, "X": 20.0}"#);
    let o = kreinamo(&["soliton-branch", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = String::from_utf8(o.stdout).unwrap();
    assert!(summary.contains("l=0 x_J=0.88"), "{summary}");

    let cfg = write_config(dir.path(), "c.json", r#"{"profile": {"variant": "constant", "alpha0": 0.0}, "l": 0, "X": [5.0, 10.0, 20.0], "modes": 3, "density": 10.0}"#);
    let o = kreinamo(&["cutoff", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("cutoff.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
}

#[test]
fn selftest_subset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = kreinamo(&["selftest", "--only", "2,6"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().filter(|l| l.contains("[PASS]")).count(), 2, "{out}");
    assert!(dir.path().join("selftest.json").exists());
}
