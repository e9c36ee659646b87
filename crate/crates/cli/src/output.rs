use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// A CSV table, kept as strings so that it can be nested inside a sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Report {
    pub table: Table,
    pub seeds: Vec<u64>,
    /// Extra CSV files requested with flags like `--per-bin`.
    pub side_files: Vec<(PathBuf, Table)>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(table: Table) -> Self {
        Self {
            table,
            ..Self::default()
        }
    }
}

/// Shortest round-trip decimal form; `NaN`, `inf` and `-inf` for the rest.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// The comment lines every output starts with.
pub fn preamble(invocation: &str, seeds: &[u64], prefix: &str) -> String {
    let seeds = if seeds.is_empty() {
        "none".to_string()
    } else {
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
    };
    format!(
        "{prefix}ballrecycle {}\n{prefix}invocation: {invocation}\n{prefix}seeds: {seeds}\n",
        env!("CARGO_PKG_VERSION")
    )
}

pub fn render_csv(table: &Table, invocation: &str, seeds: &[u64]) -> Result<Vec<u8>, CliError> {
    let mut buf = preamble(invocation, seeds, "# ").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Writes to `out`, or to stdout when `None`.
pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// `argv` without the program path, shell-quoted where needed.
pub fn invocation(args: &[String]) -> String {
    let mut parts = vec!["ballrecycle".to_string()];
    for a in args {
        if !a.is_empty() && a.chars().all(|c| c.is_ascii_alphanumeric() || "-_=:,./+@%".contains(c)) {
            parts.push(a.clone());
        } else {
            parts.push(format!("'{}'", a.replace('\'', r"'\''")));
        }
    }
    parts.join(" ")
}
