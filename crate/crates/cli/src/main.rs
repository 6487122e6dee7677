//! `risce`: run estimation sweeps, bound-only sweeps and config checks.
//!
//! Exit codes: 0 on success, 1 for invalid arguments or configuration,
//! 2 when a run fails after validation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;
use risce::harness::{run_experiment, ExperimentKind, ExperimentReport, ExperimentSpec, HarnessConfig, HarnessError, MethodSelection};

#[derive(Parser, Debug)]
#[command(name = "risce", version, about = "Channel parameter estimation experiments for active-RIS links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo sweep of the selected estimators, written as CSV.
    Run(RunArgs),
    /// Bounds only, no trials.
    Crlb(CrlbArgs),
    /// Parse and check a configuration file.
    ValidateConfig(ConfigArg),
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// TOML configuration; the built-in desk-scale setup when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// los, snr-sweep, k-sweep, active-vs-passive or crlb-only.
    #[arg(long, default_value = "snr-sweep")]
    experiment: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated SNRs in dB.
    #[arg(long, value_delimiter = ',')]
    snr_grid: Option<Vec<f64>>,
    /// Comma-separated pilot counts for k-sweep.
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
    /// SNR in dB for k-sweep.
    #[arg(long)]
    fixed_snr: Option<f64>,
    /// RIS power budget in dBm, replacing the configured one.
    #[arg(long)]
    ris_dbm: Option<f64>,
    /// I, II, III, all or none; comma-separated.
    #[arg(long, default_value = "all")]
    stages: String,
    /// vscpd+cbs, cpd+esprit, cpd+cbs, all or none; comma-separated.
    #[arg(long, default_value = "none")]
    baselines: String,
    /// Also emit one row per trial.
    #[arg(long)]
    per_trial: bool,
    /// Omit runtime rows so the CSV depends only on the inputs.
    #[arg(long)]
    no_timing: bool,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CrlbArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_delimiter = ',')]
    snr_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure class, mapped to the exit code.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn config_err(msg: &str) -> Failure {
    Failure::Config(anyhow::anyhow!("{msg}"))
}

fn load_config(arg: &ConfigArg) -> Result<HarnessConfig, Failure> {
    match &arg.config {
        Some(path) => Ok(HarnessConfig::load(path)?),
        None => Ok(HarnessConfig::desk()),
    }
}

fn run_spec(args: &RunArgs) -> Result<ExperimentSpec, Failure> {
    let kind: ExperimentKind = args.experiment.parse()?;
    let mut spec = ExperimentSpec::new(kind);
    spec.trials = args.trials;
    spec.seed = args.seed;
    spec.per_trial = args.per_trial;
    spec.timing = !args.no_timing;
    spec.methods = MethodSelection::none().parse_stages(&args.stages)?.parse_baselines(&args.baselines)?;
    let sweeps_k = kind == ExperimentKind::KSweep;
    match (&args.snr_grid, &args.k_grid) {
        (Some(_), _) if sweeps_k => return Err(config_err("k-sweep takes --k-grid, not --snr-grid")),
        (_, Some(_)) if !sweeps_k => return Err(config_err("--k-grid only applies to k-sweep")),
        (Some(snr), _) => spec.grid = snr.clone(),
        (_, Some(k)) => spec.grid = k.iter().map(|&v| v as f64).collect(),
        (None, None) => {}
    }
    if let Some(s) = args.fixed_snr {
        spec.fixed_snr_db = s;
    }
    if let Some(dbm) = args.ris_dbm {
        spec.ris_dbm = Some(dbm);
    }
    spec.validate()?;
    Ok(spec)
}

fn write_output(report: &ExperimentReport, out: Option<&Path>) -> Result<(), Failure> {
    let csv = report.to_csv();
    match out {
        Some(path) => fs::write(path, csv)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Runtime),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn summarize(report: &ExperimentReport) {
    for p in &report.points {
        for m in &p.methods {
            info!("{} {}: success {:.3}, nmse {:.3e}", p.label, m.method.label(), m.success_rate, m.nmse);
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::ValidateConfig(arg) => {
            let hc = load_config(&arg)?;
            let c = hc.counts();
            println!(
                "ok: {} direct, {} UE-RIS and {} RIS-BS paths, rank {}",
                c.direct,
                c.ue_ris,
                c.ris_bs,
                c.rank()
            );
            Ok(())
        }
        Command::Run(args) => {
            let hc = load_config(&args.config)?;
            let spec = run_spec(&args)?;
            let report = run_experiment(&spec, &hc)?;
            summarize(&report);
            write_output(&report, args.out.as_deref())
        }
        Command::Crlb(args) => {
            let hc = load_config(&args.config)?;
            let mut spec = ExperimentSpec::new(ExperimentKind::CrlbOnly);
            spec.seed = args.seed;
            spec.timing = false;
            if let Some(g) = args.snr_grid {
                spec.grid = g;
            }
            let report = run_experiment(&spec, &hc)?;
            write_output(&report, args.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
