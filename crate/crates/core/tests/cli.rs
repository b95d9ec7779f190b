use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vnrecur(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vnrecur"))
        .args(args)
        .env_remove("VNRECUR_TOL")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenario_file(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.report.json"))).unwrap()).unwrap()
}

const TWO_LEVEL: &str = include_str!("../scenarios/two-level.json");

#[test]
fn list_names_six_bundled_scenarios() {
    let o = vnrecur(&["list"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = out.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(
        names,
        [
            "two-level",
            "cycle4",
            "cycle5-khintchine",
            "prop31-pair",
            "gns-trace-m2",
            "luders-m2"
        ]
    );
}

#[test]
fn validate_bundled_and_file() {
    let o = vnrecur(&["validate", "two-level"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tempfile::tempdir().unwrap();
    let f = scenario_file(dir.path(), "s.json", TWO_LEVEL);
    let o = vnrecur(&["validate", &f]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok: two-level"));
}

#[test]
fn validate_reports_non_idempotent_projection() {
    let dir = tempfile::tempdir().unwrap();
    let bad = TWO_LEVEL.replacen("[[0.5, 0.0], [0.5, 0.0]],", "[[0.7, 0.0], [0.5, 0.0]],", 1);
    assert_ne!(bad, TWO_LEVEL);
    let f = scenario_file(dir.path(), "bad.json", &bad);
    let o = vnrecur(&["validate", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not a projection (‖P²−P‖ = "), "{}", stderr(&o));
}

#[test]
fn invalid_weights_exit_2_naming_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let bad = TWO_LEVEL.replacen(
        "\"block_dims\": [2],",
        "\"block_dims\": [2], \"block_weights\": [0.9],",
        1,
    );
    let f = scenario_file(dir.path(), "bad.json", &bad);
    let o = vnrecur(&["run", &f, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("weights must sum to 1"), "{}", stderr(&o));
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = scenario_file(dir.path(), "junk.json", "{\"schema_version\": 1, \"name\": ");
    assert_eq!(vnrecur(&["validate", &f]).status.code(), Some(2));
    let unknown = TWO_LEVEL.replacen("\"experiment\": \"continuous\"", "\"experiment\": \"spectrum\"", 1);
    let f = scenario_file(dir.path(), "unknown.json", &unknown);
    let o = vnrecur(&["validate", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parse error"));
}

#[test]
fn two_level_csv_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = vnrecur(&["run", "two-level", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("two-level.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k_or_t,correlation,threshold,in_E"));
    let mut count = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let t: f64 = cols[0].parse().unwrap();
        let c: f64 = cols[1].parse().unwrap();
        assert!((c - t.cos().powi(2) / 2.0).abs() <= 1e-10);
        count += 1;
    }
    assert_eq!(count, 1000);
    assert!(!csv.contains('\r'));
}

#[test]
fn cycle4_first_recurrence_is_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = vnrecur(&["run", "cycle4", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(dir.path(), "cycle4");
    assert_eq!(r["first_recurrence"], 4);
    assert_eq!(r["status"], "ok");
    for ext in ["summary.txt", "report.json", "csv"] {
        assert!(dir.path().join(format!("cycle4.{ext}")).exists());
    }
}

#[test]
fn every_bundled_scenario_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    for name in [
        "two-level",
        "cycle4",
        "cycle5-khintchine",
        "prop31-pair",
        "gns-trace-m2",
        "luders-m2",
    ] {
        let o = vnrecur(&["run", name, "--out", dir.path().to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        assert_eq!(report(dir.path(), name)["status"], "ok");
    }
}

#[test]
fn overrides_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = vnrecur(&[
        "run",
        "cycle4",
        "--out",
        dir.path().to_str().unwrap(),
        "--seed",
        "7",
        "--kmax",
        "9",
    ]);
    assert!(o.status.success());
    let r = report(dir.path(), "cycle4");
    assert_eq!(r["seed"], 7);
    assert_eq!(r["k_max"], 9);
    let csv = std::fs::read_to_string(dir.path().join("cycle4.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn tolerance_from_flag_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // Rounding-level GNS errors exceed an absurdly tight tolerance.
    let o = vnrecur(&["run", "gns-trace-m2", "--out", out, "--tol", "1e-30"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert_eq!(report(dir.path(), "gns-trace-m2")["status"], "invariant_failure");

    let o = Command::new(env!("CARGO_BIN_EXE_vnrecur"))
        .args(["run", "gns-trace-m2", "--out", out])
        .env("VNRECUR_TOL", "1e-30")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));

    let o = Command::new(env!("CARGO_BIN_EXE_vnrecur"))
        .args(["run", "gns-trace-m2", "--out", out, "--tol", "1e-8"])
        .env("VNRECUR_TOL", "1e-30")
        .output()
        .unwrap();
    assert!(o.status.success(), "flag overrides the environment");
}

#[test]
fn io_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = vnrecur(&["run", "cycle4", "--out", blocker.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let o = vnrecur(&[
        "run",
        "/nonexistent/scenario.json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = vnrecur(&["run", "cycle5-khintchine", "--out", dir.path().to_str().unwrap()]);
        assert!(o.status.success());
    }
    for ext in ["summary.txt", "report.json", "csv"] {
        let f = format!("cycle5-khintchine.{ext}");
        assert_eq!(
            std::fs::read(a.path().join(&f)).unwrap(),
            std::fs::read(b.path().join(&f)).unwrap()
        );
    }
    let leftovers: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}
