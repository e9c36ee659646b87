mod cli;
mod commands;
mod error;
mod output;
mod plot;
mod sweep;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use cli::{Cli, Command};
use error::CliError;
use output::{emit, preamble, render_csv, Report};

/// One-line form of a clap parse error.
pub(crate) fn clap_error(e: &clap::Error) -> CliError {
    let text = e.to_string();
    let first = text.lines().next().unwrap_or("invalid arguments");
    CliError::bad_args(first.trim_start_matches("error: ").trim())
}

/// Runs a CSV-producing subcommand.
pub(crate) fn report_for(cmd: &Command) -> Result<Report, CliError> {
    match cmd {
        Command::Simulate(a) => commands::simulate(a),
        Command::Exact(a) => commands::exact(a),
        Command::Opt(a) => commands::opt(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Btree(a) => commands::btree(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Plot(_) => Err(CliError::bad_args("plot does not produce a table")),
    }
}

fn out_path(cmd: &Command) -> Option<&std::path::Path> {
    match cmd {
        Command::Simulate(a) => a.out.out.as_deref(),
        Command::Exact(a) => a.out.out.as_deref(),
        Command::Opt(a) => a.out.out.as_deref(),
        Command::Bounds(a) => a.out.out.as_deref(),
        Command::Btree(a) => a.out.out.as_deref(),
        Command::Sweep(a) => a.out.out.as_deref(),
        Command::Plot(a) => a.out.out.as_deref(),
    }
}

fn dispatch(cmd: &Command, invocation: &str) -> Result<(), CliError> {
    if let Command::Plot(a) = cmd {
        return plot::run(a, invocation);
    }
    let report = report_for(cmd)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for (path, table) in &report.side_files {
        let bytes = render_csv(table, invocation, &report.seeds)?;
        emit(&bytes, Some(path))?;
    }
    let bytes = match cmd {
        Command::Bounds(a) if a.table => {
            let mut text = preamble(invocation, &report.seeds, "# ");
            text.push_str(&commands::bounds_as_text(&report.table));
            text.into_bytes()
        }
        _ => render_csv(&report.table, invocation, &report.seeds)?,
    };
    emit(&bytes, out_path(cmd))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            _ => {
                let err = clap_error(&e);
                eprintln!("{err}");
                return ExitCode::from(err.code as u8);
            }
        },
    };
    let invocation = output::invocation(&args[1..]);
    match dispatch(&cli.command, &invocation) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code as u8)
        }
    }
}
