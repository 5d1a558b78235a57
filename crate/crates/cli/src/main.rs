//! `regtrap`: batch runner for the regularity-expiry dropout simulation.

mod analyze;
mod calibrate;
mod compare;
mod error;
mod manifest;
mod run;
mod seeds;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use regtrap_core::{reference, Scenario};

use crate::calibrate::CalibrateArgs;
use crate::error::CliError;
use crate::run::RunArgs;

#[derive(Debug, Parser)]
#[command(
    name = "regtrap",
    version,
    about = "Simulate dropout under expiring course regularity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run seeded replications and write a results directory.
    Run {
        /// Scenario TOML; defaults to the built-in scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Curriculum CSV; defaults to the reference curriculum.
        #[arg(long)]
        curriculum: Option<PathBuf>,
        /// Archetype CSV; defaults to the reference archetypes.
        #[arg(long)]
        archetypes: Option<PathBuf>,
        /// Seeds, e.g. `1..100` or `1..3,7` (ranges are inclusive).
        #[arg(long, default_value = "1..100")]
        seeds: String,
        #[arg(long, env = "REGTRAP_OUT_DIR")]
        out: PathBuf,
        #[arg(long, env = "REGTRAP_JOBS")]
        jobs: Option<usize>,
        /// Also write per-agent event logs.
        #[arg(long)]
        events: bool,
        /// Also write the terminal records as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Verify a results directory and write the summary tables.
    Analyze {
        results: PathBuf,
        #[arg(long, env = "REGTRAP_OUT_DIR")]
        out: PathBuf,
    },
    /// Paired comparison of results directories against the first one.
    Compare {
        #[arg(required = true, num_args = 2..)]
        results: Vec<PathBuf>,
        #[arg(long, env = "REGTRAP_OUT_DIR")]
        out: PathBuf,
    },
    /// Fit archetype parameters to per-archetype targets.
    Calibrate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        curriculum: Option<PathBuf>,
        /// Starting archetypes; defaults to the reference archetypes.
        #[arg(long)]
        archetypes: Option<PathBuf>,
        /// Target CSV (archetype,dropout_rate,mean_expiries).
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long, default_value = "1..5")]
        seeds: String,
        #[arg(long, default_value_t = 300)]
        max_evaluations: usize,
        #[arg(long, env = "REGTRAP_JOBS")]
        jobs: Option<usize>,
        /// Output archetype CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a built-in input file.
    PrintDefaultConfig {
        #[arg(value_enum, default_value_t = Builtin::Scenario)]
        which: Builtin,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Builtin {
    Scenario,
    Curriculum,
    Archetypes,
    Targets,
}

fn jobs(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, CliError> {
    seeds::parse_seeds(spec).map_err(|e| CliError::config("--seeds", e))
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            scenario,
            curriculum,
            archetypes,
            seeds,
            out,
            jobs: j,
            events,
            json,
        } => {
            let args = RunArgs {
                scenario,
                curriculum,
                archetypes,
                seeds: parse_seeds(&seeds)?,
                out,
                jobs: jobs(j),
                events,
                json,
            };
            let m = run::cmd_run(&args)?;
            eprintln!(
                "{} replications written to {}",
                m.replications.len(),
                args.out.display()
            );
            Ok(())
        }
        Command::Analyze { results, out } => analyze::cmd_analyze(&results, &out),
        Command::Compare { results, out } => compare::cmd_compare(&results, &out),
        Command::Calibrate {
            scenario,
            curriculum,
            archetypes,
            targets,
            seeds,
            max_evaluations,
            jobs: j,
            out,
        } => calibrate::cmd_calibrate(&CalibrateArgs {
            scenario,
            curriculum,
            archetypes,
            targets,
            seeds: parse_seeds(&seeds)?,
            max_evaluations,
            jobs: jobs(j),
            out,
        }),
        Command::PrintDefaultConfig { which } => {
            let text = match which {
                Builtin::Scenario => Scenario::default().to_toml(),
                Builtin::Curriculum => reference::CURRICULUM_CSV.to_string(),
                Builtin::Archetypes => reference::ARCHETYPES_CSV.to_string(),
                Builtin::Targets => reference::TARGETS_CSV.to_string(),
            };
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
