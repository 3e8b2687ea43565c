mod commands;
mod config;
mod error;
mod svg;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::error::{CliError, EXIT_CONDITION_FAILED, EXIT_PASS};

#[derive(Debug, Parser)]
#[command(name = "polystab", version, about = "Robustness certificates for polynomially stable damped wave systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for the JSON, CSV and SVG artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Seed of the random initial data (overrides the config).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads (0 lets the pool decide).
    #[arg(long, global = true, value_name = "N", env = "POLYSTAB_THREADS")]
    threads: Option<usize>,

    /// What to print on stdout; files are always written in every format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Budget `kappa` from the frequency-window certificate (or a numerical estimate).
    Bounds,
    /// Admissibility conditions for the configured perturbation.
    Check,
    /// Resolvent norm along the imaginary axis for the truncated generator.
    Sweep,
    /// Energy decay of the truncated semigroup.
    Simulate,
    /// Recompute the Webster example constants and diff them against stored values.
    ReproduceWebsterExample,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs --config PATH".into()))?;
    RunConfig::load(path)
}

fn write_outputs(dir: &Path, o: &Outcome) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&o.report).expect("reports serialize") + "\n";
    fs::write(dir.join(format!("{}.json", o.stem)), json)?;
    fs::write(dir.join(format!("{}.csv", o.stem)), &o.csv)?;
    if let Some(svg) = &o.svg {
        fs::write(dir.join(format!("{}.svg", o.stem)), svg)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        // a pool that already exists keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let outcome = match cli.command {
        Command::Bounds => commands::bounds(&load(cli)?)?,
        Command::Check => commands::check(&load(cli)?)?,
        Command::Sweep => commands::sweep(&load(cli)?)?,
        Command::Simulate => commands::simulate(&load(cli)?, cli.seed)?,
        Command::ReproduceWebsterExample => commands::reproduce_webster_example()?,
    };
    write_outputs(&cli.out, &outcome)?;
    let stdout = match cli.format {
        Format::Json => serde_json::to_string_pretty(&outcome.report).expect("reports serialize") + "\n",
        Format::Csv => outcome.csv.clone(),
    };
    std::io::stdout().lock().write_all(stdout.as_bytes())?;
    Ok(if outcome.pass { EXIT_PASS } else { EXIT_CONDITION_FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            let msg = serde_json::json!({"reason": e.reason(), "message": e.to_string()});
            eprintln!("{msg}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
