//! Command-line front end for the `strata` library.

pub mod config;
pub mod error;
pub mod report;

mod commands;

use clap::{Parser, Subcommand};
use config::{Command, FileConfig, Overrides, RunConfig};
use error::CliError;
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "strata",
    version,
    about = "Stratified spatial sampling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo replications.
    #[arg(long, global = true)]
    reps: Option<usize>,

    /// Sample sizes, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    n: Option<Vec<usize>>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Confidence level of reported intervals.
    #[arg(long, global = true)]
    level: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Partition the region and export the strata.
    Stratify,
    /// Draw and export one sample plan.
    Sample,
    /// Draw a plan and estimate the total with variance estimates.
    Estimate,
    /// Quadrature moments, exact variances and biases.
    Oracle,
    /// Oracle variance rates across sample sizes.
    Rates,
    /// Normality of the standardized one-per-stratum estimator.
    Clt,
    /// Oracle and Monte Carlo variances for every scheme.
    Compare,
    /// Line-intercept coverage survey.
    Canopy,
}

impl From<&Sub> for Command {
    fn from(s: &Sub) -> Command {
        match s {
            Sub::Stratify => Command::Stratify,
            Sub::Sample => Command::Sample,
            Sub::Estimate => Command::Estimate,
            Sub::Oracle => Command::Oracle,
            Sub::Rates => Command::Rates,
            Sub::Clt => Command::Clt,
            Sub::Compare => Command::Compare,
            Sub::Canopy => Command::Canopy,
        }
    }
}

fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let overrides = Overrides {
        seed: cli.seed,
        reps: cli.reps,
        n: cli.n,
        out: cli.out,
        threads: cli.threads,
        level: cli.level,
    };
    RunConfig::resolve((&cli.command).into(), file, overrides)
}

/// Run one subcommand; returns the text for standard output.
pub fn run_config(cfg: &RunConfig) -> Result<String, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::config("threads", e.to_string()))?;
    pool.install(|| commands::execute(cfg))
}

/// Parse `argv`, run, print, and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match resolve(cli).and_then(|cfg| run_config(&cfg)) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
