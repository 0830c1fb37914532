use std::path::Path;
use std::process::{Command, Output};

fn ylab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ylab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn radial_solve_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = ylab(&["solve", "--domain", "ball", "--R", "1", "--n", "3", "--path", "radial"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("solve.csv")).unwrap();
    assert!(csv.starts_with("r,v,"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.json")).unwrap()).unwrap();
    assert!((json["v_max"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((json["max_ricci"].as_f64().unwrap() + 2.0).abs() < 1e-10);
}

#[test]
fn unknown_key_points_at_line_and_suggests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[domain]\nkind = \"ball\"\nR = 1.0\n\n[solver]\nmesh_size = 0.1\n").unwrap();
    let o = ylab(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 6, column 1"), "{err}");
    assert!(err.contains("did you mean `h`"), "{err}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[domain]\nkind = \"ball\"\nn = 3\nR = 1.0\n\n[solver]\npath = \"radial\"\n").unwrap();
    let o = ylab(&["solve", "--config", cfg.to_str().unwrap(), "--R", "2", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.json")).unwrap()).unwrap();
    assert!((json["v_max"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!(!dir.path().join("solve.csv").exists());
}

#[test]
fn annulus_scan_exit_code_reports_the_trend() {
    let dir = tempfile::tempdir().unwrap();
    let o = ylab(&["scan-annulus", "--n", "3", "--r0", "0.4,0.2,0.1,0.05", "--R", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("scan-annulus.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn invalid_parameters_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = ylab(&["solve", "--domain", "annulus", "--r0", "2", "--R", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ylab(&["selftest"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}
