use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use velobound_cli::{load_validated, plot, run_path, CliError};

#[derive(Parser)]
#[command(name = "velobound", version, about = "Velocity-bound experiments for fractional Schrodinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config, writing CSV (and optional SVG) reports.
    Run { config: PathBuf },
    /// Render a velocity report CSV as an SVG next to it, or to `--output`.
    Plot {
        csv: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => match run_path(&config) {
            Ok(outcome) => {
                for line in outcome.lines() {
                    println!("{line}");
                }
                for f in &outcome.files {
                    eprintln!("wrote {}", f.display());
                }
                ExitCode::from(outcome.exit_code() as u8)
            }
            Err(e) => fail(e),
        },
        Command::Plot { csv, output } => {
            let text = match std::fs::read_to_string(&csv) {
                Ok(t) => t,
                Err(e) => return fail(CliError::Io(e)),
            };
            let svg = match plot::plot_csv(&text) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let out = output.unwrap_or_else(|| csv.with_extension("svg"));
            match std::fs::write(&out, svg) {
                Ok(()) => {
                    eprintln!("wrote {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(CliError::Io(e)),
            }
        }
        Command::Validate { config } => match load_validated(&config) {
            Ok(v) => {
                println!("valid: kind={} grid={}x{} L={}", v.kind().name(), v.grid.dim(), v.grid.n_points(), v.grid.half_width());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
