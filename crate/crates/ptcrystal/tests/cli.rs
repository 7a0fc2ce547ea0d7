use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const REFERENCE_LATTICE: &str = "[lattice]\na = 8\nV0 = 0.002\nalpha = 0.3\nn_s = 1.42\nlambda = 0.633\n";
const CRITICAL_LATTICE: &str = "[lattice]\na = 6\nV0 = 2e-4\nn_s = 1.42\nlambda = 0.633\nform = single_exp\n";

fn run(command: &str, config: &str, dir: &Path, strict: bool) -> (Output, PathBuf) {
    fs::create_dir_all(dir).unwrap();
    let cfg = dir.join(format!("{command}.ini"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("{command}-out"));
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ptcrystal"));
    cmd.arg(command).arg("--config").arg(&cfg).arg("--out").arg(&out);
    if strict {
        cmd.arg("--strict");
    }
    (cmd.output().unwrap(), out)
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn bands_are_deterministic_and_carry_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let (first, out) = run("bands", REFERENCE_LATTICE, dir.path(), false);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let a = fs::read(out.join("bands.csv")).unwrap();
    let (_, out2) = run("bands", REFERENCE_LATTICE, &dir.path().join("again"), false);
    assert_eq!(a, fs::read(out2.join("bands.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    let hash = ptcrystal::config::hex_sha256(REFERENCE_LATTICE.as_bytes());
    assert_eq!(lines.next().unwrap(), format!("# config_sha256={hash}"));
    assert_eq!(lines.next().unwrap(), "kappa,band,re_E,im_E,phi");
    assert!(!text.contains('\r'));
    assert_eq!(rows(&out.join("bands.csv")).len(), 2 * 64);
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = run("propagate", &format!("{REFERENCE_LATTICE}[drive]\nLambda = -1\ngamma = 1\n"), dir.path(), false);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("drive.Lambda must be > 0"));

    let wide = format!("{REFERENCE_LATTICE}[drive]\nLambda = 1e4\ngamma = 1\n[grid]\nlength = 400\nabsorber_width = 120\n");
    let (out, _) = run("propagate", &wide, dir.path(), false);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.absorber_width"));

    let (out, _) = run("cascade", &format!("{REFERENCE_LATTICE}[drive]\nLambda = 1e4\nF0 = 1e-5\n"), dir.path(), false);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_step_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{REFERENCE_LATTICE}[drive]\nLambda = 1e4\nF0 = 0\n[grid]\npoints = 1024\ndz = 1e6\n[run]\nz_end = 1e8\n");
    let (out, _) = run("propagate", &cfg, dir.path(), false);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blowup"));
}

#[test]
fn strict_mode_escalates_validity_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{REFERENCE_LATTICE}[drive]\nLambda = 1e4\nF0 = 1e-3\n[run]\nvalidity_threshold = 0.05\n");
    let (lenient, _) = run("quasienergy", &cfg, dir.path(), false);
    assert_eq!(lenient.status.code(), Some(0));
    let (strict, _) = run("quasienergy", &cfg, &dir.path().join("s"), true);
    assert_eq!(strict.status.code(), Some(4));
}

#[test]
fn quasienergy_report_is_real_for_a_cosine_drive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{REFERENCE_LATTICE}[drive]\nLambda = 1e4\ngamma = 1.684\n");
    let (out, path) = run("quasienergy", &cfg, dir.path(), true);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for row in rows(&path.join("quasi_numeric.csv")) {
        assert!(row[3].parse::<f64>().unwrap().abs() < 1e-8);
    }
}

#[test]
fn dl_scan_reports_the_bessel_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let (out, path) = run("dl-scan", REFERENCE_LATTICE, dir.path(), false);
    assert_eq!(out.status.code(), Some(0));
    let points: Vec<f64> = rows(&path.join("dl_collapse.csv")).iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(points.len(), 2);
    assert!((points[0] - 2.405).abs() < 0.002 && (points[1] - 5.520).abs() < 0.002, "{points:?}");
}

#[test]
fn alpha_scan_finds_the_breaking_point() {
    let dir = tempfile::tempdir().unwrap();
    let (out, path) = run("alpha-scan", &format!("{REFERENCE_LATTICE}[run]\nalpha_points = 31\nn_kappa = 32\n"), dir.path(), false);
    assert_eq!(out.status.code(), Some(0));
    let alpha_c: f64 = rows(&path.join("alpha_c.csv"))[0][0].parse().unwrap();
    assert!((alpha_c - 1.0).abs() < 0.02, "{alpha_c}");
}

#[test]
fn cascade_lists_stationary_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{CRITICAL_LATTICE}[drive]\nLambda = 1e4\nF0_over_Fc = 1.5\n[run]\nn_max = 2\nrecord_every = 100\n");
    let (out, path) = run("cascade", &cfg, dir.path(), false);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let points = rows(&path.join("stationary.csv"));
    assert_eq!(points.len(), 2);
    assert_eq!(points[0][2], "linear");
    assert!((points[0][3].parse::<f64>().unwrap() - 0.95).abs() < 0.01);
    assert_eq!(rows(&path.join("cascade.csv")).len(), 3 * 201);
}

#[test]
fn propagate_writes_power_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{REFERENCE_LATTICE}[drive]\nLambda = 1e4\ngamma = 2.405\n[grid]\npoints = 1024\n[run]\nz_end = 1000\nrecord_every = 200\nsnapshot_every = 5\n");
    let (out, path) = run("propagate", &cfg, dir.path(), false);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(rows(&path.join("power.csv")).len(), 11);
    let snap = fs::read_to_string(path.join("snapshot_0000.csv")).unwrap();
    assert_eq!(snap.lines().nth(1).unwrap(), "x,re_psi,im_psi,abs_psi");
    assert!(path.join("snapshot_0002.csv").exists());
}

#[test]
fn staircase_comparison_at_one_and_a_half_critical_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{CRITICAL_LATTICE}[drive]\nLambda = 1e4\nF0_over_Fc = 1.5\n[grid]\nlength = 6000\npoints = 16384\n[run]\nw = 80\nn_max = 2\n");
    let (out, path) = run("compare-staircase", &cfg, dir.path(), false);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let crossings = rows(&path.join("crossings.csv"));
    assert_eq!(crossings.len(), 2);
    for c in crossings {
        assert!(c[7].parse::<f64>().unwrap() <= 0.15, "{c:?}");
    }
}
