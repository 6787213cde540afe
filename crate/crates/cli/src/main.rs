//! Command-line driver: simulate trajectories, estimate the autocorrelation
//! operator from a trajectory CSV, run Monte Carlo rate/tail experiments,
//! and audit the spectral inequality bounds.
//!
//! All commands take `--config PATH` (flat `section.key = value` file) and
//! an optional `--seed N` overriding the configured master seed. Validation
//! is fail-fast: nothing is written unless the whole configuration builds a
//! valid model.

mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use banach_ar::diagnostics::{
    inequality_audit, inequality_audit_perfect, median, rate_experiment, tail_experiment,
    BoundReport, ExperimentConfig,
};
use banach_ar::estimator::{
    empirical_moments, rho_from_eigensystem, select_truncation, spectral_decomposition,
};
use banach_ar::process::{default_burn_in, derive_seed, simulate};
use clap::{Args, Parser, Subcommand};

use config::{model_from_config, RunConfig};

const AUDIT_STREAM: u64 = 0xA5D17;

#[derive(Parser)]
#[command(
    name = "banach-ar",
    version,
    about = "Banach-space AR(1) lab: simulation, spectral estimation, prediction, audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory and write it as CSV with a config echo sidecar
    Simulate(CommonArgs),
    /// Estimate spectrum, operator, and one-step prediction from a trajectory CSV
    Estimate(EstimateArgs),
    /// Monte Carlo rate experiment (plus tail frequencies when eta is set)
    Experiment(CommonArgs),
    /// Audit the kernel/eigenvector inequality bounds over replicates
    Audit(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat `section.key = value` configuration file
    #[arg(long)]
    config: PathBuf,
    /// Override simulation.master_seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trajectory CSV (defaults to <output.dir>/trajectory.csv)
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(&args),
        Command::Estimate(args) => run_estimate(&args),
        Command::Experiment(args) => run_experiment(&args),
        Command::Audit(args) => run_audit(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(args: &CommonArgs) -> Result<(RunConfig, u64)> {
    let cfg = RunConfig::from_file(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.simulation.master_seed);
    Ok((cfg, seed))
}

fn ensure_output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

fn run_simulate(args: &CommonArgs) -> Result<()> {
    let (cfg, seed) = load(args)?;
    let model = model_from_config(&cfg)?;
    let burn_in = cfg
        .simulation
        .burn_in
        .unwrap_or_else(|| default_burn_in(&model));
    let traj = simulate(&model, cfg.simulation.n, burn_in, seed)?;

    let dir = ensure_output_dir(&cfg)?;
    io::write_trajectory(&dir.join("trajectory.csv"), &traj, cfg.output.precision)?;
    io::write_text(&dir.join("model.cfg"), &cfg.echo(args.seed))?;
    println!(
        "simulate: wrote {} rows of dimension {} to {}",
        traj.len(),
        traj.dim(),
        dir.join("trajectory.csv").display()
    );
    Ok(())
}

fn run_estimate(args: &EstimateArgs) -> Result<()> {
    let (cfg, _) = load(&args.common)?;
    let model = model_from_config(&cfg)?;
    let w = model.weights();
    let traj_path = args
        .trajectory
        .clone()
        .unwrap_or_else(|| cfg.output.dir.join("trajectory.csv"));
    let traj = io::read_trajectory(&traj_path, cfg.model.m)?;

    let moments = empirical_moments(&traj, w)?;
    let eigs = spectral_decomposition(&moments.c_n, w)?;
    let k_n = select_truncation(&eigs, moments.n, cfg.estimation.rule)?;
    let rho = rho_from_eigensystem(&eigs, &moments.d_n, w, k_n)?;
    let prediction = rho.apply(traj.row(traj.len() - 1))?;

    let dir = ensure_output_dir(&cfg)?;
    let p = cfg.output.precision;
    io::write_eigenvalues(&dir.join("eigenvalues.csv"), eigs.values(), p)?;
    io::write_matrix(&dir.join("eigenvectors.csv"), eigs.vectors(), p)?;
    io::write_matrix(&dir.join("rho_matrix.csv"), &rho, p)?;
    io::write_element(&dir.join("prediction.csv"), traj.len(), &prediction, p)?;

    let mut sidecar = cfg.echo(args.common.seed);
    sidecar.push_str(&format!("estimate.n = {}\n", moments.n));
    sidecar.push_str(&format!("estimate.k_n = {k_n}\n"));
    sidecar.push_str(&format!(
        "estimate.rule = {}\n",
        cfg.estimation.rule.describe()
    ));
    sidecar.push_str(&format!("estimate.trajectory = {}\n", traj_path.display()));
    io::write_text(&dir.join("estimate.cfg"), &sidecar)?;
    println!(
        "estimate: n = {}, k_n = {k_n}, outputs in {}",
        moments.n,
        dir.display()
    );
    Ok(())
}

fn run_experiment(args: &CommonArgs) -> Result<()> {
    let (cfg, seed) = load(args)?;
    let model = model_from_config(&cfg)?;
    let exp_cfg = ExperimentConfig {
        grid: cfg.experiment.n_grid.clone(),
        replicates: cfg.experiment.replicates,
        rule: cfg.estimation.rule,
        master_seed: seed,
        burn_in: cfg.simulation.burn_in,
    };
    let tracked = cfg.experiment.tracked;
    let report = rate_experiment(&model, &exp_cfg, tracked)?;

    let dir = ensure_output_dir(&cfg)?;
    let p = cfg.output.precision;

    let mut long = io::LongWriter::new(p);
    for (gi, n) in report.grid.iter().enumerate() {
        for (rep, value) in report.samples[gi].iter().enumerate() {
            long.push(*n, rep, tracked.name(), *value);
        }
        if let Some(baselines) = &report.baseline_samples {
            for (rep, value) in baselines[gi].iter().enumerate() {
                long.push(*n, rep, "prediction_b_baseline", *value);
            }
        }
    }
    long.finish(&dir.join("experiment_long.csv"))?;

    let mut summary = String::from("n,median_metric\n");
    for (n, med) in report.grid.iter().zip(&report.medians) {
        summary.push_str(&format!("{n},{}\n", io::fmt_float(*med, p)));
    }
    match (report.slope, report.r2) {
        (Some(slope), Some(r2)) => {
            summary.push_str(&format!("slope,{}\n", io::fmt_float(slope, p)));
            summary.push_str(&format!("r2,{}\n", io::fmt_float(r2, p)));
        }
        _ => summary.push_str("fit,none\n"),
    }
    io::write_text(&dir.join("experiment_summary.csv"), &summary)?;

    if let Some(eta) = cfg.experiment.eta {
        let tail = tail_experiment(&model, &exp_cfg, eta)?;
        let mut out = String::from("n,frequency,q_proxy\n");
        for ((n, freq), proxy) in tail
            .grid
            .iter()
            .zip(&tail.frequencies)
            .zip(&tail.q_proxy)
        {
            out.push_str(&format!(
                "{n},{},{}\n",
                io::fmt_float(*freq, p),
                io::fmt_float(*proxy, p)
            ));
        }
        io::write_text(&dir.join("tail.csv"), &out)?;
    }

    io::write_text(&dir.join("experiment.cfg"), &cfg.echo(args.seed))?;
    println!(
        "experiment: tracked {} over grid {:?}, outputs in {}",
        tracked.name(),
        report.grid,
        dir.display()
    );
    Ok(())
}

fn push_report(long: &mut io::LongWriter, n: usize, rep: usize, report: &BoundReport) {
    for record in &report.records {
        long.push(n, rep, &format!("{}_lhs", record.name), record.lhs);
        long.push(n, rep, &format!("{}_rhs", record.name), record.rhs);
        long.push(
            n,
            rep,
            &format!("{}_holds", record.name),
            if record.holds { 1.0 } else { 0.0 },
        );
        long.push(
            n,
            rep,
            &format!("{}_informational", record.name),
            if record.informational { 1.0 } else { 0.0 },
        );
    }
    long.push(n, rep, "quad_ratio_min", report.quad_ratio_min);
    long.push(n, rep, "quad_ratio_max", report.quad_ratio_max);
    long.push(n, rep, "defect_true_frame", report.defect_true_frame);
    long.push(n, rep, "defect_empirical", report.defect_empirical);
    long.push(n, rep, "k_n", report.k_n as f64);
}

fn run_audit(args: &CommonArgs) -> Result<()> {
    let (cfg, seed) = load(args)?;
    let model = model_from_config(&cfg)?;
    let n = cfg.simulation.n;
    let k_n = cfg
        .estimation
        .rule
        .evaluate(n)
        .min(model.dim() - 1)
        .max(1);
    let n_min = cfg.experiment.n_min;

    let reports: Vec<BoundReport> = if cfg.audit.perfect_moments {
        vec![inequality_audit_perfect(&model, k_n)?]
    } else {
        let burn_in = cfg
            .simulation
            .burn_in
            .unwrap_or_else(|| default_burn_in(&model));
        let mut out = Vec::with_capacity(cfg.experiment.replicates);
        for rep in 0..cfg.experiment.replicates {
            let traj_seed = derive_seed(seed, AUDIT_STREAM, rep as u64);
            let traj = simulate(&model, n, burn_in, traj_seed)?;
            out.push(inequality_audit(&model, &traj, k_n, n_min)?);
        }
        out
    };

    let dir = ensure_output_dir(&cfg)?;
    let p = cfg.output.precision;
    let mut long = io::LongWriter::new(p);
    for (rep, report) in reports.iter().enumerate() {
        push_report(&mut long, n, rep, report);
    }
    long.finish(&dir.join("audit_long.csv"))?;

    let mut summary = String::from("metric,value\n");
    let names: Vec<&str> = reports[0].records.iter().map(|r| r.name).collect();
    for name in names {
        let held = reports
            .iter()
            .flat_map(|r| &r.records)
            .filter(|r| r.name == name && r.holds)
            .count();
        let rate = held as f64 / reports.len() as f64;
        summary.push_str(&format!("{name}_holds_rate,{}\n", io::fmt_float(rate, p)));
    }
    let k1s: Vec<f64> = reports.iter().map(|r| r.quad_ratio_min).collect();
    let k2s: Vec<f64> = reports.iter().map(|r| r.quad_ratio_max).collect();
    summary.push_str(&format!(
        "quad_ratio_min_median,{}\n",
        io::fmt_float(median(&k1s), p)
    ));
    summary.push_str(&format!(
        "quad_ratio_max_median,{}\n",
        io::fmt_float(median(&k2s), p)
    ));
    summary.push_str(&format!("k_n,{k_n}\n"));
    io::write_text(&dir.join("audit_summary.csv"), &summary)?;
    io::write_text(&dir.join("audit.cfg"), &cfg.echo(args.seed))?;
    println!(
        "audit: {} replicate(s) at n = {n}, k_n = {k_n}, outputs in {}",
        reports.len(),
        dir.display()
    );
    Ok(())
}
