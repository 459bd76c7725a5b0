//! `alpi`: solve environments, run planners and sweep planner grids from a
//! JSON experiment document.

mod commands;
mod config;
mod error;
mod output;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Overrides;
use crate::error::{CliError, CliResult};

const THREADS_VAR: &str = "ALPI_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "alpi",
    version,
    about = "Adaptive-lookahead policy iteration experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the environment exactly and write V⋆ and π⋆ per seed.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one planner on every seed; writes traces, ledgers and a summary.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every planner in `planners` on every seed and rank them.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Draw an SVG from trace, comparison, ranking or histogram CSVs.
    Render {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        /// Column for the x axis of line charts.
        #[arg(long, default_value = "iter")]
        x: String,
        /// Column for the y axis of line charts.
        #[arg(long, default_value = "dist_inf")]
        y: String,
        #[arg(long)]
        title: Option<String>,
        /// Linear instead of logarithmic y axis.
        #[arg(long)]
        linear: bool,
    },
}

fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{THREADS_VAR} must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match cli.command {
        Command::Solve { config, overrides } => {
            commands::solve(&config::load(&config, &overrides)?)
        }
        Command::Run { config, overrides } => commands::run(&config::load(&config, &overrides)?),
        Command::Sweep { config, overrides } => {
            commands::sweep(&config::load(&config, &overrides)?)
        }
        Command::Render {
            inputs,
            output,
            x,
            y,
            title,
            linear,
        } => {
            let svg = render::render(&render::RenderRequest {
                inputs,
                x,
                y,
                title,
                linear,
            })?;
            output::write_atomic(&output, svg.as_bytes())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
