//! `freecircle run <config.json>`: executes one experiment described by a
//! JSON config and writes its report as canonical JSON or CSV.
//!
//! Exit codes: 0 on success, 1 on any configuration or computation error,
//! 2 when the experiment ran but an inequality report failed.

mod config;
mod exec;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{ExperimentConfig, Guards, OutputFormat};
use report::{Cell, Table};

#[derive(Parser)]
#[command(
    name = "freecircle",
    version,
    about = "Experiments with products of free unitary elements on the unit circle"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Runs the experiment described by a JSON config file.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Report destination; overrides the config's output-path
        /// (stdout when neither is given).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Report format; overrides the config's output-format
        /// (json when neither is given).
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for OutputFormat {
    fn from(arg: FormatArg) -> Self {
        match arg {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let CliCommand::Run {
        config,
        output,
        format,
    } = cli.command;
    match run(&config, output, format.map(OutputFormat::from)) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(
    config_path: &Path,
    output_flag: Option<PathBuf>,
    format_flag: Option<OutputFormat>,
) -> Result<u8, String> {
    let guards = Guards::from_env()?;
    let raw = std::fs::read_to_string(config_path)
        .map_err(|e| format!("cannot read {}: {e}", config_path.display()))?;
    let config: ExperimentConfig = serde_json::from_str(&raw)
        .map_err(|e| format!("{}: {e}", config_path.display()))?;

    // Command-line flags override the config's own output fields.
    let (config_path_field, config_format) = config.output_fields();
    let target = output_flag.or_else(|| config_path_field.cloned());
    let format = format_flag
        .or(config_format)
        .unwrap_or(OutputFormat::Json);
    let sidecar = target.as_ref().map(|p| eigenangle_sidecar(p));

    let outcome = exec::execute(&config, guards, sidecar.as_deref())?;
    let rendered = match format {
        OutputFormat::Json => report::to_json(&outcome.json),
        OutputFormat::Csv => report::to_csv(&outcome.table),
    };
    match &target {
        Some(path) => report::write_atomic(path, &rendered)?,
        None => write_stdout(&rendered)?,
    }
    if let (Some(rows), Some(path)) = (&outcome.eigenangles, &sidecar) {
        report::write_atomic(path, &report::to_csv(&eigenangle_table(rows)))?;
    }
    Ok(exit_code(outcome.bounds_failed))
}

/// Writes the report to stdout; a closed pipe (e.g. `| head`) ends the
/// run quietly instead of erroring.
fn write_stdout(rendered: &str) -> Result<(), String> {
    use std::io::Write as _;
    match std::io::stdout().lock().write_all(rendered.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(format!("cannot write to stdout: {e}")),
    }
}

/// Eigenvalue angles ride in a CSV next to the main report, whatever its
/// format: `out.json` gets `out.eigenangles.csv`.
fn eigenangle_sidecar(target: &Path) -> PathBuf {
    target.with_extension("eigenangles.csv")
}

fn eigenangle_table(rows: &[(usize, usize, f64)]) -> Table {
    Table {
        columns: vec!["trial", "index", "angle"],
        rows: rows
            .iter()
            .map(|&(trial, index, angle)| {
                vec![
                    Cell::Int(trial as i64),
                    Cell::Int(index as i64),
                    Cell::Float(angle),
                ]
            })
            .collect(),
    }
}

/// A failed inequality report exits with 2; clean runs exit with 0. Errors
/// exit with 1 through the `Err` path in `main`.
fn exit_code(bounds_failed: bool) -> u8 {
    if bounds_failed {
        2
    } else {
        0
    }
}
