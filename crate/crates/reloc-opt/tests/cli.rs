//! Command-line behavior, driven through the compiled binary: exit codes,
//! output files, byte-level determinism, and environment handling.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::tempdir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_reloc-opt"));
    // Tests pin their own verbosity; don't inherit the harness environment.
    cmd.env_remove("RELOC_OPT_LOG");
    cmd
}

fn write_cfg(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, body).unwrap();
    path
}

/// Two-year horizon keeps every solve under a second.
const FAST: &str = "[params]\nT = 2\n\n[wage]\nfamily = quadratic\nheight = 1\n";

fn csv_column(text: &str, idx: usize) -> Vec<f64> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn solve_writes_trajectory_and_summary() {
    let tmp = tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), FAST);
    let out = tmp.path().join("out");
    let status = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,x,y,c,z,a"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 100);
    assert!(rows.iter().all(|r| r.split(',').count() == 6));
    // Nodes span [0, T].
    let t = csv_column(&traj, 0);
    assert_eq!(t[0], 0.0);
    assert!((t.last().unwrap() - 2.0).abs() < 1e-12);

    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("converged = true"), "{summary}");
    assert!(summary.contains("regime = "), "{summary}");
    // Quiet by default: the outer trace is a debug artifact.
    assert!(!out.join("trace.csv").exists());
}

#[test]
fn constant_wage_solve_reports_zero_speed() {
    let tmp = tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "[params]\nT = 2\n\n[wage]\nfamily = constant\nlevel = 0.25\n",
    );
    let out = tmp.path().join("out");
    let status = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let z = csv_column(&traj, 4);
    assert!(z.iter().all(|v| v.abs() <= 1e-8));
}

#[test]
fn identical_configs_give_byte_identical_outputs() {
    let tmp = tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), FAST);
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let status = bin()
            .args(["solve", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        runs.push(fs::read(out.join("trajectory.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);

    let mut sweeps = Vec::new();
    for name in ["sa", "sb"] {
        let out = tmp.path().join(name);
        let status = bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--t-min", "1", "--t-max", "3", "--t-steps", "3"])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        sweeps.push(fs::read(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(sweeps[0], sweeps[1]);
}

#[test]
fn out_flag_overrides_config_directory() {
    let tmp = tempdir().unwrap();
    let cfg_dir = tmp.path().join("from-config");
    let body = format!("{FAST}\n[output]\ndir = {}\n", cfg_dir.display());
    let cfg = write_cfg(tmp.path(), &body);

    let flag_dir = tmp.path().join("from-flag");
    let status = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&flag_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(flag_dir.join("trajectory.csv").exists());
    assert!(!cfg_dir.join("trajectory.csv").exists());

    let status = bin().args(["solve", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(cfg_dir.join("trajectory.csv").exists());
}

#[test]
fn missing_config_file_fails_with_io_code() {
    let tmp = tempdir().unwrap();
    let status = bin()
        .args(["solve", "--config"])
        .arg(tmp.path().join("nope.conf"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn bad_config_fails_with_config_code() {
    let tmp = tempdir().unwrap();
    for body in [
        // Unknown key.
        "[wage]\nfamily = quadratic\nbogus = 1\n",
        // Key from the wrong family.
        "[wage]\nfamily = quadratic\nlevel = 0.25\n",
        // Key before any section.
        "rho = 0.05\n[wage]\nfamily = quadratic\n",
        // Out-of-range parameter.
        "[params]\ntheta = 1.5\n\n[wage]\nfamily = quadratic\n",
    ] {
        let cfg = write_cfg(tmp.path(), body);
        let status = bin()
            .args(["solve", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(tmp.path().join("out"))
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(3), "config: {body:?}");
    }
}

#[test]
fn usage_errors_and_help() {
    let tmp = tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), FAST);
    let status = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--bogus-flag")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    assert_eq!(bin().arg("--help").status().unwrap().code(), Some(0));
    assert_eq!(bin().arg("--version").status().unwrap().code(), Some(0));
}

#[test]
fn outer_budget_exhaustion_fails_with_solver_code() {
    let tmp = tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), &format!("{FAST}\n[solver]\nmax_outer = 1\n"));
    let status = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn sweep_tolerates_partial_convergence() {
    let tmp = tempdir().unwrap();
    // A budget the short horizon fits inside but the long one does not.
    let cfg = write_cfg(tmp.path(), &format!("{FAST}\n[solver]\nmax_outer = 12\n"));
    let out = tmp.path().join("out");
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--t-min", "5", "--t-max", "60", "--t-steps", "2"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let flags: Vec<&str> = sweep
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert!(flags.contains(&"true"), "{sweep}");
    assert!(flags.contains(&"false"), "{sweep}");
}

#[test]
fn verify_writes_residual_report() {
    let tmp = tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), FAST);
    let out = tmp.path().join("out");
    let status = bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = fs::read_to_string(out.join("residuals.txt")).unwrap();
    for field in ["location_ode", "fd_objective_sup", "legendre_ok = true", "converged = true"] {
        assert!(report.contains(field), "missing {field} in:\n{report}");
    }
}

#[test]
fn oracle_writes_direct_controls() {
    let tmp = tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        &format!("{FAST}\n[oracle]\nmax_iters = 40\npenalty_rounds = 2\n"),
    );
    let out = tmp.path().join("out");
    let status = bin()
        .args(["oracle", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--n", "8"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let direct = fs::read_to_string(out.join("direct.csv")).unwrap();
    assert_eq!(direct.lines().count(), 9);
    assert_eq!(direct.lines().next(), Some("k,c,z"));
    let summary = fs::read_to_string(out.join("oracle_summary.txt")).unwrap();
    assert!(summary.contains("intervals = 8"), "{summary}");
    assert!(summary.contains("relative_gap = "), "{summary}");
}

#[test]
fn extremals_scan_marks_exactly_one_root() {
    let tmp = tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), FAST);
    let out = tmp.path().join("out");
    let status = bin()
        .args(["extremals", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--alpha-grid", "48"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let scan = fs::read_to_string(out.join("alpha_scan.csv")).unwrap();
    assert_eq!(scan.lines().next(), Some("alpha,g_alpha,root"));
    let marked = scan
        .lines()
        .skip(1)
        .filter(|l| l.rsplit(',').next() == Some("1"))
        .count();
    assert_eq!(marked, 1, "{scan}");
}

#[test]
fn debug_env_writes_outer_trace() {
    let tmp = tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), FAST);
    let out = tmp.path().join("out");
    let status = bin()
        .env("RELOC_OPT_LOG", "debug")
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("iter,lambda1,alpha,terminal_assets,relative_residual"));
    assert!(trace.lines().count() >= 2);
}
