mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::CommonArgs;
use config::{RunConfig, DEFAULT_SEED};

/// Causal-effect estimation with auxiliary Gaussian covariates and
/// non-Gaussian treatment noise.
#[derive(Parser)]
#[command(name = "eunc", version, about)]
struct Cli {
    /// Key-value config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (default: the config value, then 1729).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for replication-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic dataset from a scenario and write it as CSV.
    Simulate {
        /// Built-in scenario name or scenario file path.
        #[arg(long)]
        scenario: Option<String>,
        /// Number of rows.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Estimate treatment effects from a CSV dataset.
    Estimate {
        /// Proceed past failed identification diagnostics.
        #[arg(long)]
        override_diagnostics: bool,
    },
    /// Run Monte Carlo benchmark suites.
    Benchmark {
        /// Built-in suite: table1, table23, sensitivity or rate.
        #[arg(long)]
        suite: Option<String>,
        /// Reduced-replication profile.
        #[arg(long)]
        fast: bool,
    },
    /// Check the analytic oracle suite and exit nonzero on any failure.
    Validate {
        /// Multiply every tolerance (0 forces exact comparison).
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
        /// Perturbation injected into the computed values (self-test hook).
        #[arg(long, default_value_t = 0.0, hide = true)]
        perturb: f64,
    },
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("eunc-out"));
    if let Some(jobs) = cli.jobs.or(cfg.jobs) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }

    match &cli.command {
        Command::Simulate { scenario, n } => {
            let common = CommonArgs {
                seed,
                out,
                fast: false,
                override_diagnostics: false,
            };
            commands::cmd_simulate(&cfg, scenario.as_deref(), *n, &common)
        }
        Command::Estimate {
            override_diagnostics,
        } => {
            let common = CommonArgs {
                seed,
                out,
                fast: false,
                override_diagnostics: *override_diagnostics,
            };
            commands::cmd_estimate(&cfg, &common)
        }
        Command::Benchmark { suite, fast } => {
            let common = CommonArgs {
                seed,
                out,
                fast: *fast,
                override_diagnostics: false,
            };
            commands::cmd_benchmark(&cfg, suite.as_deref(), &common)
        }
        Command::Validate {
            tolerance_scale,
            perturb,
        } => commands::cmd_validate(*tolerance_scale, *perturb),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
