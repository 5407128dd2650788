use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bifair::cli::{cmd_oracle, cmd_run, cmd_validate, Overrides};
use bifair::Algorithm;

/// Bi-level fair bandit simulations.
#[derive(Parser)]
#[command(name = "bifair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every constraint in a config file.
    Validate { config: PathBuf },
    /// Run the experiment and write CSV/JSON artifacts.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated algorithm names, e.g. bf_ucb,ucb1.
        #[arg(long, value_delimiter = ',')]
        algos: Option<Vec<Algorithm>>,
    },
    /// Print the fair optimum and bound inputs of a fixed instance.
    Oracle { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let code = match cli.command {
        Command::Validate { config } => cmd_validate(&config, &mut out, &mut err),
        Command::Run {
            config,
            out: dir,
            runs,
            horizon,
            seed,
            algos,
        } => {
            let overrides = Overrides {
                runs,
                horizon,
                seed,
                algorithms: algos,
            };
            cmd_run(&config, &dir, &overrides, &mut out, &mut err)
        }
        Command::Oracle { config } => cmd_oracle(&config, &mut out, &mut err),
    };
    ExitCode::from(code as u8)
}
