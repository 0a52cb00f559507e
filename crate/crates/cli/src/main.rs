//! `lpnorm` command-line front end.
//!
//! Exit status: 0 on success, 1 on a failed verification or computation,
//! 2 on a configuration error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::{run, CliError};
use config::{merge, Command, ConfigFile, Format};

#[derive(Debug, Parser)]
#[command(name = "lpnorm", version, about = "Normalization about L4 with radiation, oblateness and drag")]
struct Cli {
    /// JSON config; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the main artifact here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Option<Command>,
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(p) => match ConfigFile::load(p) {
            Ok(c) => c,
            Err(e) => return fail(2, &e.0),
        },
        None => ConfigFile::default(),
    };
    let mut cmd = match (cli.command, &file.subcommand) {
        (Some(c), Some(s)) if c.name() != s => {
            return fail(2, &format!("config names subcommand `{s}` but `{}` was given", c.name()))
        }
        (Some(c), _) => c,
        (None, Some(s)) => match Command::empty(s) {
            Ok(c) => c,
            Err(e) => return fail(2, &e.0),
        },
        (None, None) => return fail(2, "no subcommand given (see --help)"),
    };
    merge(&mut cmd, &file);
    let output = cli.output.or(file.output.clone());
    let format = cli.format.or(file.format);

    let outcome = match run(&cmd, format, output.as_deref()) {
        Ok(o) => o,
        Err(CliError::Config(m)) => return fail(2, &m),
        Err(CliError::Run(m)) => return fail(1, &m),
    };
    if let Some(c) = &outcome.console {
        print!("{c}");
    }
    let write = |path: &PathBuf, text: &str| {
        std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
    };
    match &output {
        Some(p) => {
            if let Err(m) = write(p, &outcome.text) {
                return fail(1, &m);
            }
        }
        None if outcome.console.is_none() => print!("{}", outcome.text),
        None => {}
    }
    for (p, text) in &outcome.files {
        if let Err(m) = write(p, text) {
            return fail(1, &m);
        }
    }
    if outcome.failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
