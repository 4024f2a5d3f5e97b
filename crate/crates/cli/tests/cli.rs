//! End-to-end tests of the `hep` binary: exit codes, file outputs,
//! reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn hep(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hep"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_potential(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn stationary_reports_tiny_tv() {
    let dir = tempfile::tempdir().unwrap();
    let pot = write_potential(
        dir.path(),
        "p.json",
        r#"{"family":"bfamily","b":4.0,"depth":4096}"#,
    );
    let out = hep(
        &[
            "stationary",
            "--potential",
            &pot,
            "--L",
            "6",
            "--N",
            "3",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("run/summary.json"));
    assert!(summary["total_variation"].as_f64().unwrap() <= 1e-10);
    assert!(summary["balance_residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(summary["states"].as_u64().unwrap(), 20);

    let manifest = read_json(&dir.path().join("run/manifest.json"));
    assert_eq!(manifest["command"], "stationary");
    assert!(manifest["potential_digest"]
        .as_str()
        .unwrap()
        .starts_with("fnv1a64:"));

    let csv = std::fs::read_to_string(dir.path().join("run/stationary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21); // header + C(6,3) states
    assert!(csv.lines().nth(1).unwrap().contains(","));
}

#[test]
fn stationary_cap_exceeded_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let pot = write_potential(dir.path(), "p.json", r#"{"family":"constant"}"#);
    let out = hep(
        &[
            "stationary",
            "--potential",
            &pot,
            "--L",
            "18",
            "--N",
            "9",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn current_emits_parabola_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let pot = write_potential(dir.path(), "p.json", r#"{"family":"constant"}"#);
    let out = hep(
        &[
            "current",
            "--potential",
            &pot,
            "--rho",
            "0.2:0.8:0.2",
            "--L",
            "50,100",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run/current.csv")).unwrap();
    assert!(csv.contains("# u_c = 1"));
    assert!(csv.contains("# rho_c = 0"));
    assert!(csv.contains("rho,j,branch,u,j_L50,j_L100"));
    // rho = 0.4 row: j = 0.24.
    let row = csv
        .lines()
        .find(|l| l.starts_with("0.400000"))
        .expect("row for rho = 0.4");
    let fields: Vec<&str> = row.split(',').collect();
    let j: f64 = fields[1].parse().unwrap();
    assert!((j - 0.24).abs() < 1e-8);
    // Finite-size column: exact binomial value N(L-N)/(L(L-1)).
    let j50: f64 = fields[4].parse().unwrap();
    assert!((j50 - 20.0 * 30.0 / (50.0 * 49.0)).abs() < 1e-12);

    // Interpretation note for the boundedness condition is printed.
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("boundedness"), "{stdout}");
}

#[test]
fn current_with_empty_grid_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let pot = write_potential(dir.path(), "p.json", r#"{"family":"constant"}"#);
    let out = hep(
        &[
            "current",
            "--potential",
            &pot,
            "--rho",
            "0.9:0.1:0.1",
            "--out",
            "run",
        ],
        dir.path(),
    );
    // start > end: config error.
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_torus_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let pot = write_potential(dir.path(), "p.json", r#"{"family":"constant"}"#);
    let args = [
        "simulate",
        "--potential",
        "p.json",
        "--torus",
        "8,4",
        "--t",
        "200",
        "--replicas",
        "2",
        "--seed",
        "7",
        "--out",
        "a",
    ];
    let _ = pot;
    let out = hep(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut args_b = args;
    args_b[args.len() - 1] = "b";
    let out = hep(&args_b, dir.path());
    assert!(out.status.success());
    let a = std::fs::read_to_string(dir.path().join("a/summary.json")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b/summary.json")).unwrap();
    assert_eq!(a, b);
    let summary = read_json(&dir.path().join("a/summary.json"));
    let estimate = summary["current_estimate"].as_f64().unwrap();
    let exact = summary["exact_stationary_current"].as_f64().unwrap();
    assert!((estimate - exact).abs() < 0.1);
    assert!(dir.path().join("a/headways.csv").exists());
}

#[test]
fn simulate_line_reports_displacement() {
    let dir = tempfile::tempdir().unwrap();
    write_potential(dir.path(), "p.json", r#"{"family":"constant"}"#);
    let out = hep(
        &[
            "simulate",
            "--potential",
            "p.json",
            "--line",
            "1,0",
            "--t",
            "50",
            "--replicas",
            "64",
            "--seed",
            "3",
            "--burn",
            "0",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("run/summary.json"));
    let mean = summary["mean_displacement"].as_f64().unwrap();
    let expected = summary["expected_displacement"].as_f64().unwrap();
    assert_eq!(expected, 50.0);
    // 64 replicas of Poisson(50): the mean sits within 5 sigma.
    assert!((mean - expected).abs() < 5.0 * (50.0f64 / 64.0).sqrt());
}

#[test]
fn duality_reports_residual_and_mixture() {
    let dir = tempfile::tempdir().unwrap();
    write_potential(dir.path(), "p.json", r#"{"family":"bfamily","b":4.0}"#);
    let out = hep(
        &[
            "duality",
            "--potential",
            "p.json",
            "--N",
            "2",
            "--window",
            "24",
            "--t",
            "1",
            "--replicas",
            "4000",
            "--seed",
            "7",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("run/report.json"));
    assert!(report["intertwining_residual"].as_f64().unwrap() <= 1e-12);
    assert!(report["leftmost_tv"].as_f64().unwrap() < 0.1);
    let csv = std::fs::read_to_string(dir.path().join("run/leftmost_hist.csv")).unwrap();
    assert!(csv.starts_with("displacement,empirical,poisson_pmf"));
}

#[test]
fn duality_with_divergent_partition_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write_potential(dir.path(), "p.json", r#"{"family":"bfamily","b":0.5}"#);
    let out = hep(
        &[
            "duality",
            "--potential",
            "p.json",
            "--N",
            "2",
            "--window",
            "24",
            "--t",
            "1",
            "--replicas",
            "100",
            "--seed",
            "7",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("diverges"), "{err}");
}

#[test]
fn bad_arguments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write_potential(dir.path(), "p.json", r#"{"family":"constant"}"#);
    // Missing geometry.
    let out = hep(
        &[
            "simulate",
            "--potential",
            "p.json",
            "--t",
            "10",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    // Unreadable potential.
    let out = hep(
        &[
            "stationary",
            "--potential",
            "missing.json",
            "--L",
            "4",
            "--N",
            "2",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    // Malformed potential JSON.
    write_potential(dir.path(), "bad.json", r#"{"family":"nope"}"#);
    let out = hep(
        &[
            "stationary",
            "--potential",
            "bad.json",
            "--L",
            "4",
            "--N",
            "2",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}
