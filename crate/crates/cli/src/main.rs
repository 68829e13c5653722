mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Context;
use config::ExperimentConfig;
use dpdbp_core::{Error, Result};

/// Minimum density power divergence estimation experiments.
#[derive(Parser)]
#[command(name = "dpdbp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV tables and plots.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for replicate grids.
    #[arg(long)]
    threads: Option<usize>,
    /// Override every base seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the estimator to a dataset at one tuning constant.
    Fit(Common),
    /// Track the population functional over a contamination grid.
    MdpdfSweep(Common),
    /// Evaluate the asymptotic breakdown lower bound.
    AbpBound(Common),
    /// Replicate contaminated fits and summarize them by quartiles.
    Simulate(Common),
    /// Report overlap decay along a divergence schedule.
    CheckAssumptions(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Fit(c)
            | Command::MdpdfSweep(c)
            | Command::AbpBound(c)
            | Command::Simulate(c)
            | Command::CheckAssumptions(c) => c,
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let common = cli.command.common();
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // ignore the error from configuring twice (tests call run repeatedly)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global();
    }
    let cfg = ExperimentConfig::load(&common.config)?;
    let ctx = Context {
        out: common.out.clone(),
        seed: common.seed,
    };
    match &cli.command {
        Command::Fit(_) => commands::cmd_fit(&cfg, &ctx),
        Command::MdpdfSweep(_) => commands::cmd_mdpdf_sweep(&cfg, &ctx),
        Command::AbpBound(_) => commands::cmd_abp_bound(&cfg, &ctx),
        Command::Simulate(_) => commands::cmd_simulate(&cfg, &ctx),
        Command::CheckAssumptions(_) => commands::cmd_check_assumptions(&cfg, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) | Error::Domain(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
