//! End-to-end tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_banach-ar"))
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let out_dir = dir.join("out");
    let body = format!(
        "model.m = 4\n\
         model.profile = geometric\n\
         model.ratio = 0.5\n\
         model.scale = 0.5\n\
         model.rho = 0.5\n\
         simulation.n = 100\n\
         simulation.burn_in = 20\n\
         simulation.master_seed = 11\n\
         output.dir = {}\n\
         {extra}",
        out_dir.display()
    );
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn simulate_writes_expected_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    run_ok(bin().arg("simulate").arg("--config").arg(&cfg));
    let csv = std::fs::read_to_string(tmp.path().join("out/trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(csv.starts_with("i,f1,f2,f3,f4\n"));
    assert!(tmp.path().join("out/model.cfg").exists());
}

#[test]
fn simulate_is_byte_deterministic() {
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    let cfg_a = write_config(tmp_a.path(), "");
    let cfg_b = write_config(tmp_b.path(), "");
    run_ok(bin().arg("simulate").arg("--config").arg(&cfg_a));
    run_ok(bin().arg("simulate").arg("--config").arg(&cfg_b));
    let a = std::fs::read(tmp_a.path().join("out/trajectory.csv")).unwrap();
    let b = std::fs::read(tmp_b.path().join("out/trajectory.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_override_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    run_ok(bin().arg("simulate").arg("--config").arg(&cfg));
    let base = std::fs::read(tmp.path().join("out/trajectory.csv")).unwrap();
    run_ok(bin()
        .arg("simulate")
        .arg("--config")
        .arg(&cfg)
        .arg("--seed")
        .arg("99"));
    let overridden = std::fs::read(tmp.path().join("out/trajectory.csv")).unwrap();
    assert_ne!(base, overridden);
    let echo = std::fs::read_to_string(tmp.path().join("out/model.cfg")).unwrap();
    assert!(echo.contains("simulation.master_seed = 99"));
}

#[test]
fn non_stationary_config_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "model.rho_max = 0.99\n");
    // Overwrite rho with a non-contractive value.
    let body = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("model.rho = 0.5", "model.rho = 1.0");
    std::fs::write(&cfg, body).unwrap();
    let out = bin().arg("simulate").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stationarity"), "stderr: {stderr}");
    assert!(!tmp.path().join("out").exists(), "no output on invalid config");
}

#[test]
fn unknown_key_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "model.bogus = 1\n");
    let out = bin().arg("simulate").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn estimate_logs_rule_truncation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "estimation.rule = log\nestimation.c1 = 0.5\nestimation.c0 = 0\n",
    );
    // 4096 observations: floor(0.5 ln 4096) = 4, and rank allows it with m = 4.
    let body = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("simulation.n = 100", "simulation.n = 4096");
    std::fs::write(&cfg, body).unwrap();
    run_ok(bin().arg("simulate").arg("--config").arg(&cfg));
    let out = run_ok(bin().arg("estimate").arg("--config").arg(&cfg));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("k_n = 4"), "stdout: {stdout}");
    for file in [
        "eigenvalues.csv",
        "eigenvectors.csv",
        "rho_matrix.csv",
        "prediction.csv",
        "estimate.cfg",
    ] {
        assert!(tmp.path().join("out").join(file).exists(), "{file} missing");
    }
    let sidecar = std::fs::read_to_string(tmp.path().join("out/estimate.cfg")).unwrap();
    assert!(sidecar.contains("estimate.k_n = 4"));
    assert!(sidecar.contains("estimate.n = 4096"));
}

#[test]
fn estimate_handles_two_row_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    std::fs::create_dir_all(tmp.path().join("out")).unwrap();
    std::fs::write(
        tmp.path().join("out/trajectory.csv"),
        "i,f1,f2,f3,f4\n0,1.0,0.5,0.25,0.125\n1,0.5,0.25,0.125,0.0625\n",
    )
    .unwrap();
    let out = run_ok(bin().arg("estimate").arg("--config").arg(&cfg));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("k_n = 1"), "stdout: {stdout}");
}

#[test]
fn estimate_reports_malformed_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    std::fs::create_dir_all(tmp.path().join("out")).unwrap();
    std::fs::write(
        tmp.path().join("out/trajectory.csv"),
        "i,f1,f2,f3,f4\n0,1.0,0.5,0.25,0.125\n1,broken,0.25,0.125,0.0625\n",
    )
    .unwrap();
    let out = bin().arg("estimate").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
}

#[test]
fn experiment_summary_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "experiment.n_grid = 64,128,256\nexperiment.replicates = 5\nexperiment.tracked = cov_hs\n",
    );
    run_ok(bin().arg("experiment").arg("--config").arg(&cfg));
    let summary = std::fs::read_to_string(tmp.path().join("out/experiment_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "n,median_metric");
    assert_eq!(lines.len(), 6, "3 medians + slope + r2 + header: {summary}");
    assert!(lines[4].starts_with("slope,"));
    assert!(lines[5].starts_with("r2,"));
    let long = std::fs::read_to_string(tmp.path().join("out/experiment_long.csv")).unwrap();
    assert_eq!(long.lines().count(), 1 + 3 * 5);
    assert!(long.starts_with("n,replicate,metric,value\n"));
}

#[test]
fn experiment_single_replicate_and_tail() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "experiment.n_grid = 64,128\nexperiment.replicates = 1\nexperiment.tracked = rho_op_b\nexperiment.eta = 0.25\n",
    );
    run_ok(bin().arg("experiment").arg("--config").arg(&cfg));
    let summary = std::fs::read_to_string(tmp.path().join("out/experiment_summary.csv")).unwrap();
    assert!(summary.contains("slope,"), "fit emitted for 2-point grid");
    let long = std::fs::read_to_string(tmp.path().join("out/experiment_long.csv")).unwrap();
    // Median of a single replicate is that replicate's value.
    let value_line = long.lines().nth(1).unwrap();
    let value = value_line.split(',').nth(3).unwrap();
    assert!(summary.contains(value));
    assert!(tmp.path().join("out/tail.csv").exists());
    let tail = std::fs::read_to_string(tmp.path().join("out/tail.csv")).unwrap();
    assert!(tail.starts_with("n,frequency,q_proxy\n"));
    assert_eq!(tail.lines().count(), 3);
}

#[test]
fn audit_perfect_moments_all_hold() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "audit.perfect_moments = true\n");
    run_ok(bin().arg("audit").arg("--config").arg(&cfg));
    let summary = std::fs::read_to_string(tmp.path().join("out/audit_summary.csv")).unwrap();
    for name in ["kernel_sup_bound", "kernel_diff_bound", "eigvec_b_bound"] {
        let line = summary
            .lines()
            .find(|l| l.starts_with(&format!("{name}_holds_rate")))
            .unwrap_or_else(|| panic!("{name} missing in {summary}"));
        let rate: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(rate, 1.0, "{name} holds rate");
    }
}

#[test]
fn audit_below_floor_is_informational() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "experiment.replicates = 2\nexperiment.n_min = 512\n",
    );
    // n = 100 stays below the informational floor of 512.
    run_ok(bin().arg("audit").arg("--config").arg(&cfg));
    let long = std::fs::read_to_string(tmp.path().join("out/audit_long.csv")).unwrap();
    let info_lines: Vec<&str> = long
        .lines()
        .filter(|l| l.contains("kernel_diff_bound_informational"))
        .collect();
    assert_eq!(info_lines.len(), 2);
    let flag = |line: &str| line.split(',').nth(3).unwrap().parse::<f64>().unwrap();
    for line in info_lines {
        assert_eq!(flag(line), 1.0, "informational flag set: {line}");
    }
    // The non-asymptotic kernel bound is never informational.
    for line in long
        .lines()
        .filter(|l| l.contains("kernel_sup_bound_informational"))
    {
        assert_eq!(flag(line), 0.0, "{line}");
    }
}

#[test]
fn estimate_round_trips_simulated_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    run_ok(bin().arg("simulate").arg("--config").arg(&cfg));
    // Re-reading the emitted CSV must reproduce the exact doubles: run
    // estimate twice and compare outputs byte for byte.
    run_ok(bin().arg("estimate").arg("--config").arg(&cfg));
    let first = std::fs::read(tmp.path().join("out/rho_matrix.csv")).unwrap();
    run_ok(bin().arg("estimate").arg("--config").arg(&cfg));
    let second = std::fs::read(tmp.path().join("out/rho_matrix.csv")).unwrap();
    assert_eq!(first, second);
}
