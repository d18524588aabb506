use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use frac_cauchy::cli_io::{execute, Command};

/// Fractional abstract Cauchy problem toolkit.
#[derive(Parser, Debug)]
#[command(name = "frac-cauchy", version)]
struct Args {
    /// Subcommand to run; must match the `command` key of the config.
    #[arg(value_enum)]
    command: Command,
    /// JSON config (or a manifest from an earlier run).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV tables and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = execute(args.command, &args.config, &args.out);
    ExitCode::from(code as u8)
}
