use std::path::Path;
use std::process::{Command, Output};

use velobound_cli::plot::{plot_csv, polyline_points};
use velobound_core::observables::{ExperimentReport, ReportRow};

fn velobound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_velobound")).args(args).output().expect("spawn velobound")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const FREE_SPECTRUM: &str = r#"
[grid]
n_points = 32
half_width = 4.0

[symbol]
rho = 0.5

[experiment]
kind = "spectrum"
tolerance = 1e-10

[output]
directory = "out"
"#;

#[test]
fn non_power_of_two_grid_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &FREE_SPECTRUM.replace("n_points = 32", "n_points = 100"));
    let out = velobound(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("power of two"), "stderr: {stderr}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn malformed_toml_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "broken.toml", "[grid\nn_points = 32");
    assert_eq!(velobound(&["run", &cfg]).status.code(), Some(2));
}

#[test]
fn unknown_key_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "extra.toml", &format!("{FREE_SPECTRUM}\n[symbol2]\nrho = 1.0\n"));
    assert_eq!(velobound(&["validate", &cfg]).status.code(), Some(2));
}

#[test]
fn rho_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rho.toml", &FREE_SPECTRUM.replace("rho = 0.5", "rho = 1.5"));
    assert_eq!(velobound(&["validate", &cfg]).status.code(), Some(3));
}

#[test]
fn validate_reports_grid_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ok.toml", FREE_SPECTRUM);
    let out = velobound(&["validate", &cfg]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("kind=spectrum"), "{stdout}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn free_spectrum_matches_symbol_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE_SPECTRUM);
    let out = velobound(&["run", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    let csv = std::fs::read_to_string(dir.path().join("out/eigenvalues.csv")).unwrap();
    let mut got: Vec<f64> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    got.sort_by(f64::total_cmp);
    // Lattice k = pi j / L, j = -16..15, eigenvalue sqrt(1 + k^2) - 1.
    let mut want: Vec<f64> = (-16..16)
        .map(|j| {
            let k = std::f64::consts::PI * j as f64 / 4.0;
            (1.0 + k * k).sqrt() - 1.0
        })
        .collect();
    want.sort_by(f64::total_cmp);
    assert_eq!(got.len(), 32);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-10, "{g} vs {w}");
    }
}

#[test]
fn plot_command_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut report = ExperimentReport::default();
    report.push_meta("kind", "minimal");
    for (t, integrand, cumulative) in [(1.0, 0.5, 0.5), (2.0, 0.25, 0.75), (4.0, 0.125, 0.875)] {
        report.rows.push(ReportRow {
            t,
            integrand,
            cumulative,
            boundary_mass: 0.0,
        });
    }
    let csv = report.to_csv_string();
    let csv_path = dir.path().join("report.csv");
    std::fs::write(&csv_path, &csv).unwrap();
    let a = dir.path().join("a.svg");
    let b = dir.path().join("b.svg");
    for target in [&a, &b] {
        let out = velobound(&["plot", csv_path.to_str().unwrap(), "-o", target.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let svg = std::fs::read_to_string(&a).unwrap();
    assert_eq!(svg, std::fs::read_to_string(&b).unwrap());
    let pts = polyline_points(&svg, "cumulative").unwrap();
    assert_eq!(pts.iter().map(|p| p.1).collect::<Vec<_>>(), vec![0.5, 0.75, 0.875]);
    assert_eq!(svg, plot_csv(&csv).unwrap());
}

#[test]
fn plot_rejects_foreign_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("eig.csv");
    std::fs::write(&csv_path, "index,eigenvalue\n0,1.0\n").unwrap();
    assert_eq!(velobound(&["plot", csv_path.to_str().unwrap()]).status.code(), Some(2));
}
