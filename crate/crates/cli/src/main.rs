use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chd_cli::commands::{self, error_line, exit_code, SweepOutcome, EXIT_CONFIG, EXIT_OK};
use chd_cli::config::{self, RawConfig};
use chd_core::{Error, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chd-sharp", version, about = "Cahn-Hilliard-Darcy phase-field runs and epsilon sweeps")]
struct Cli {
    /// Print every configuration key with its default and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation; writes the diagnostics CSV and snapshots.
    Simulate { config: PathBuf },
    /// Run an epsilon sweep; writes per-eps CSVs and a summary table.
    Sweep { config: PathBuf },
    /// Check the potential, its transform, the mobilities and admissibility.
    Check { config: Option<PathBuf> },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn run(cli: Cli) -> Result<i32> {
    if cli.print_defaults {
        print!("{}", config::defaults_text());
        return Ok(EXIT_OK);
    }
    match cli.command {
        None => Err(Error::Config(
            "no command given; use simulate, sweep, check or --print-defaults".into(),
        )),
        Some(Command::Simulate { config }) => {
            let cfg = config::parse_config(&read(&config)?)?;
            let s = commands::simulate(&cfg)?;
            print!("{}", commands::simulate_report(&s));
            Ok(EXIT_OK)
        }
        Some(Command::Sweep { config }) => {
            let cfg = config::parse_config(&read(&config)?)?;
            let s = commands::sweep(&cfg)?;
            print!("{}", std::fs::read_to_string(&s.summary_csv).unwrap_or_default());
            if let SweepOutcome::Scaling(r) = &s.outcome {
                if !r.checks.iter().all(|c| c.pass) || s.holder_ok == Some(false) {
                    eprintln!("warning: some sweep checks failed (see summary)");
                }
            }
            Ok(s.exit_code())
        }
        Some(Command::Check { config }) => {
            let text = match config {
                Some(p) => read(&p)?,
                None => String::new(),
            };
            let rows = commands::check(&RawConfig::parse(&text)?)?;
            print!("{}", commands::check_table(&rows));
            Ok(if rows.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_CONFIG })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
