//! Command-line front end: `run`, `grid`, `calibrate` and `report`.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on runtime errors.

use std::ffi::OsString;
use std::fs;
use std::io;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::experiment::{calibrate_mu1, full_grid_with, run_monte_carlo, Calibration, ExperimentError};
use crate::reporting::{self, ReportError, ResultRecord, AGGREGATES_FILE};

/// Caps the worker count when `--workers` is not given.
pub const MAX_WORKERS_ENV: &str = "MFLMS_MAX_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "mflms", version, about = "LMS / fractional LMS / momentum fractional LMS Monte-Carlo benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "results")]
    pub out: PathBuf,
    /// Root seed; overrides `base_seed`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads for the Monte-Carlo engine.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<NonZeroUsize>,
    /// Configuration override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one algorithm on one scenario and write `run.csv`.
    Run,
    /// Run the full scenario grid and write tables, curves and `aggregates.csv`.
    Grid,
    /// Calibrate the mFLMS base step for every grid scenario.
    Calibrate,
    /// Regenerate tables and curves from a saved `aggregates.csv`.
    Report {
        /// Aggregates file; defaults to `<out>/aggregates.csv`.
        #[arg(long, value_name = "PATH")]
        aggregates: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read config {path}: {source}")]
    ReadConfig { path: PathBuf, source: io::Error },
    #[error("{MAX_WORKERS_ENV}: `{0}` is not a positive integer")]
    WorkerEnv(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::ReadConfig { .. } | CliError::WorkerEnv(_) => 1,
            CliError::Experiment(ExperimentError::InvalidConfig(_)) => 1,
            _ => 2,
        }
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Loads the config file (if any) and applies `--set` and `--seed`.
pub fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
                path: path.clone(),
                source,
            })?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("base_seed", &seed.to_string())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn worker_count(requested: Option<NonZeroUsize>) -> Result<usize, CliError> {
    if let Some(n) = requested {
        return Ok(n.get());
    }
    let available = std::thread::available_parallelism().map_or(1, NonZeroUsize::get);
    match std::env::var(MAX_WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(cap) if cap > 0 => Ok(available.min(cap)),
            _ => Err(CliError::WorkerEnv(v)),
        },
        Err(_) => Ok(available),
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let workers = worker_count(cli.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Run => cmd_run(&cfg, &cli.out),
        Command::Grid => cmd_grid(&cfg, &cli.out),
        Command::Calibrate => cmd_calibrate(&cfg, &cli.out),
        Command::Report { aggregates } => {
            let path = aggregates.clone().unwrap_or_else(|| cli.out.join(AGGREGATES_FILE));
            cmd_report(&path, &cli.out)
        }
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| {
        ReportError::Io {
            path: dir.to_path_buf(),
            source,
        }
        .into()
    })
}

fn cmd_run(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let (params, noise) = cfg.single_run()?;
    let scenario = cfg.experiment.scenario(noise);
    eprintln!(
        "run: {} mu1={} muf={} f={} alpha={} noise={} ({}) runs={}",
        params.variant(),
        params.mu1(),
        params.muf(),
        params.f(),
        params.alpha(),
        noise,
        scenario.noise.reading,
        scenario.n_runs
    );
    let agg = run_monte_carlo(&params, &scenario)?;
    create_dir(out)?;
    let path = reporting::write(out, "run.csv", &reporting::run_csv(&params, &scenario.noise, &agg))?;
    for (it, v) in agg.checkpoints.iter().zip(&agg.mean_nwd_at_checkpoints) {
        println!("{it}\t{v}");
    }
    println!("mse_of_mean\t{}", agg.mse_of_mean);
    println!("divergences\t{}", agg.divergence_count);
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_grid(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let exp = cfg.grid()?;
    let total = exp.noise_levels.len() * exp.alphas.len() * (exp.fs.len() + 1);
    let mut done = 0;
    let entries = full_grid_with(exp, |e| {
        done += 1;
        let rec = ResultRecord::from(e);
        let cal = e
            .calibration
            .map(|c| format!(", calibrated at iteration {}", c.target_iteration))
            .unwrap_or_default();
        eprintln!(
            "grid [{done}/{total}] noise {} {}: mu1={}{cal}, final NWD {:.4}, divergences {}",
            reporting::noise_tag(&e.noise),
            rec.label(),
            e.params.mu1(),
            e.aggregate.mean_nwd_at_checkpoints.last().copied().unwrap_or(f64::NAN),
            e.aggregate.divergence_count
        );
    })?;
    let records: Vec<ResultRecord> = entries.iter().map(ResultRecord::from).collect();
    let written = reporting::write_grid_outputs(&records, out)?;
    eprintln!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}

fn cmd_calibrate(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let exp = cfg.grid()?;
    let mut jobs = Vec::new();
    for &noise in &exp.noise_levels {
        for (&alpha, &eta) in exp.alphas.iter().zip(&exp.lms_etas) {
            for &f in &exp.fs {
                jobs.push((noise, alpha, eta, f));
            }
        }
    }
    // each calibration is itself parallel; run them one after another
    let results: Vec<Calibration> = jobs
        .iter()
        .map(|&(noise, alpha, eta, f)| {
            let cal = calibrate_mu1(&exp.template(f, alpha), eta, &exp.scenario(noise), &exp.calibration)?;
            eprintln!(
                "calibrate noise {noise} alpha={alpha} f={f} eta={eta}: mu1={} (iteration {}, NWD {:.4} vs {:.4})",
                cal.mu1, cal.target_iteration, cal.achieved_nwd, cal.target_nwd
            );
            Ok(cal)
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Report(e.into());
    wtr.write_record([
        "noise_level",
        "alpha",
        "f",
        "lms_eta",
        "mu1",
        "target_iteration",
        "target_nwd",
        "achieved_nwd",
    ])
    .map_err(csv_err)?;
    for (&(noise, alpha, eta, f), cal) in jobs.iter().zip(&results) {
        wtr.write_record([
            noise.to_string(),
            alpha.to_string(),
            f.to_string(),
            eta.to_string(),
            cal.mu1.to_string(),
            cal.target_iteration.to_string(),
            cal.target_nwd.to_string(),
            cal.achieved_nwd.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let text = String::from_utf8(wtr.into_inner().expect("in-memory writer")).expect("csv output is utf8");
    print!("{text}");
    create_dir(out)?;
    let path = reporting::write(out, "calibration.csv", &text)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_report(aggregates: &Path, out: &Path) -> Result<(), CliError> {
    let records = reporting::read_aggregates(aggregates)?;
    let written = reporting::write_reports(&records, out)?;
    eprintln!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}
