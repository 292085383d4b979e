use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_opspace"))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Parses `lower` and `upper` of the first CSV row named `quantity`.
fn csv_row(csv: &str, quantity: &str) -> (f64, f64) {
    let line = csv
        .lines()
        .find(|l| l.split(',').next() == Some(quantity))
        .unwrap_or_else(|| panic!("no row {quantity} in\n{csv}"));
    let f: Vec<&str> = line.split(',').collect();
    (f[1].parse().unwrap(), f[2].parse().unwrap())
}

fn profile(csv: &str, quantity: &str) -> Vec<f64> {
    let name = format!("{quantity}.profile");
    csv.lines()
        .filter(|l| l.split(',').next() == Some(name.as_str()))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn norm_of_matrix_unit_is_one() {
    let dir = TempDir::new().unwrap();
    let e = write(dir.path(), "e.json", r#"{"space": "M:2", "level": 1, "coeffs": [1, 0, 0, 0]}"#);
    let o = run(&["norm", &e, "--format", "csv"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    assert!(csv.starts_with("quantity,lower,upper,level,witness_ref,converged\n"));
    assert_eq!(csv_row(&csv, "min_norm"), (1.0, 1.0));
}

#[test]
fn transpose_cb_profile() {
    let dir = TempDir::new().unwrap();
    let t = write(dir.path(), "t.json", r#"{"builtin": "transpose:2"}"#);
    let o = run(&["cbnorm", &t, "--level-max", "2", "--format", "csv"]);
    assert!(o.status.success());
    let p = profile(&stdout(&o), "cb_norm");
    assert_eq!(p.len(), 2);
    assert!((p[0] - 1.0).abs() < 1e-6 && (p[1] - 2.0).abs() < 1e-6, "{p:?}");
}

#[test]
fn commutative_suite_passes() {
    let o = run(&["suite", "prop3_4", "--collection", "D:3", "--trials", "3", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().filter(|l| l.starts_with("assert:")).all(|l| l.ends_with(",true")));
}

#[test]
fn reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let t = write(dir.path(), "t.json", r#"{"builtin": "transpose:2"}"#);
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        let o = run(&["wcbnorm", &t, "--weight", "transpose", "--level-max", "2", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        assert!(o.stdout.is_empty());
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("\"seed\": 7"));
    assert!(text.contains("certified range"));
}

#[test]
fn frobenius_oracle_violation_exits_three() {
    let o = run(&["ruancheck", "--oracle", "frobenius:M:2", "--budget", "200", "--axiom", "r1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(3));
    let (lo, _) = csv_row(&stdout(&o), "r1.max_excess");
    assert!(lo >= 2f64.sqrt() - 1.0 - 1e-9);
}

#[test]
fn min_oracle_passes() {
    let o = run(&["ruancheck", "--oracle", "min:D:2", "--budget", "100"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn parse_errors_name_the_location() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"space\": \"M:2\",\n \"level\": 1,\n \"coeffs\": [1, 0,, 0]}");
    let o = run(&["norm", &bad]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bad.json") && err.contains("line 3"), "{err}");

    let wrong = write(dir.path(), "wrong.json", r#"{"space": "M:2", "level": 1, "coeffs": [1, 0]}"#);
    let o = run(&["norm", &wrong]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("coeffs"));
}

#[test]
fn tensor_and_decomposition_brackets() {
    let dir = TempDir::new().unwrap();
    let u = write(
        dir.path(),
        "u.json",
        r#"{"left": "M:2", "right": "M:2", "level": 1, "coeffs": [1,0,0,0, 0,0,0,0, 0,0,0,0, 0,0,0,1]}"#,
    );
    let o = run(&["tensornorm", &u, "--case", "1", "--format", "csv"]);
    assert!(o.status.success());
    let (lo, up) = csv_row(&stdout(&o), "tensor_norm");
    assert!((lo - 1.0).abs() < 1e-9 && (up - 1.0).abs() < 1e-6, "{lo} {up}");
    let o = run(&["decomp", &u, "--mode", "haagerup", "--format", "csv"]);
    assert!(o.status.success());
    let (_, up) = csv_row(&stdout(&o), "haagerup_norm");
    assert!(up <= 1.0 + 1e-6);
}

#[test]
fn bilinear_and_class_norms() {
    let dir = TempDir::new().unwrap();
    let mm = write(dir.path(), "mm.json", r#"{"builtin": "matmul:2"}"#);
    let o = run(&["bilnorm", &mm, "--weight", "product", "--level-max", "2", "--format", "csv"]);
    assert!(o.status.success());
    let (lo, up) = csv_row(&stdout(&o), "bilinear_norm");
    assert!((lo - 1.0).abs() < 1e-6 && up >= lo);

    let t = write(dir.path(), "t.json", r#"{"builtin": "transpose:2"}"#);
    let o = run(&["classnorm", &t, "--collection", "M:2,D:4", "--format", "csv"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    assert!((csv_row(&csv, "class_norm").0 - 2.0).abs() < 1e-6);
    assert!((csv_row(&csv, "class_norm.member[D:4]").0 - 1.0).abs() < 1e-6);
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = run(&["suite", "nonexistent"]);
    assert!(!o.status.success());
}
