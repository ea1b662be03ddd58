//! `pbshm`: build structure populations, simulate monitoring campaigns, run
//! transfer experiments and calibrate distance thresholds.

mod commands;
mod error;
mod files;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pbshm_core::par::{self, Execution};

use crate::error::{CliError, CliResult};
use crate::files::RunContext;

#[derive(Debug, Parser)]
#[command(name = "pbshm", version, about = "Population-based SHM transfer experiments")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "PBSHM_OUT", default_value = "pbshm-out")]
    out: PathBuf,
    /// Seed overriding the one in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (1 runs sequentially).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Progress on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Population files and structure distances.
    Population {
        #[command(subcommand)]
        action: PopulationAction,
    },
    /// Simulate a campaign into fibre directories.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run transfer experiments and write the report.
    Transfer {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit the distance threshold from transfer outcomes.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the target accuracy of the configuration.
        #[arg(long)]
        target_accuracy: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum PopulationAction {
    /// Expand a population description into structure files.
    Build {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the members of a population.
    List {
        #[arg(long)]
        config: PathBuf,
    },
    /// Pairwise structure distances as CSV.
    DistanceMatrix {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let exec = match cli.jobs {
        Some(0) => return Err(CliError::Input("--jobs must be at least 1".into())),
        Some(1) => Execution::Sequential,
        Some(n) => {
            par::set_worker_threads(n);
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    let mut ctx = RunContext::new(cli.out, cli.seed, cli.verbose)?;
    let (name, config) = match &cli.command {
        Command::Population { action } => match action {
            PopulationAction::Build { config } => {
                commands::population::build(&mut ctx, config)?;
                ("population build", config)
            }
            PopulationAction::List { config } => {
                commands::population::list(&mut ctx, config)?;
                ("population list", config)
            }
            PopulationAction::DistanceMatrix { config } => {
                commands::population::distance_matrix(&mut ctx, config, exec)?;
                ("population distance-matrix", config)
            }
        },
        Command::Simulate { config } => {
            commands::simulate::run(&mut ctx, config, exec)?;
            ("simulate", config)
        }
        Command::Transfer { config } => {
            commands::transfer::run(&mut ctx, config, exec)?;
            ("transfer", config)
        }
        Command::Calibrate {
            config,
            target_accuracy,
        } => {
            commands::transfer::calibrate(&mut ctx, config, *target_accuracy, exec)?;
            ("calibrate", config)
        }
    };
    let manifest = ctx.finish(name, config)?;
    if cli.verbose {
        eprintln!("manifest written to {}", manifest.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = std::panic::catch_unwind(|| run(cli)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(CliError::Internal(msg))
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
