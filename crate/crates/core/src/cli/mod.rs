//! The `becnet` command-line driver: figure datasets, the laboratory
//! parameter table and the oracle suite.
//!
//! Every command writes plot-ready CSV and a summary JSON into `--out`. Each
//! file starts with a `#` line holding the resolved configuration. Exit codes
//! are 0 on success, 1 when an acceptance check fails and 2 for configuration
//! errors.

mod commands;
pub mod config;
pub mod validate;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
pub use config::{load_config, Config};

#[derive(Debug, Parser)]
#[command(name = "becnet", version, about = "BEC qubit network simulations")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file; built-in defaults fill missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override a configuration value, e.g. `fig3.Delta=12`.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Spontaneous emission: trajectories and rate scaling.
    Fig3,
    /// Cavity photon loss under the forward/reverse echo.
    Fig4,
    /// z- and x-dephasing, echo error versus N.
    Fig5,
    /// Laboratory parameter table.
    Estimate,
    /// Small-N oracle suite.
    Validate,
}

/// Result of a command: whether every acceptance check held.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub passed: bool,
    pub written: Vec<PathBuf>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Parse-free entry point used by the binary and by tests.
pub fn run(args: &Args) -> Result<Outcome> {
    let config = load_config(args.config.as_deref(), &args.overrides)?;
    fs::create_dir_all(&args.out)?;
    let mut out = Output::new(&args.out);
    let passed = match args.command {
        Command::Fig3 => commands::fig3(&config, &mut out)?,
        Command::Fig4 => commands::fig4(&config, &mut out)?,
        Command::Fig5 => commands::fig5(&config, &mut out)?,
        Command::Estimate => commands::estimate(&config, &mut out)?,
        Command::Validate => validate::command(&config, &mut out)?,
    };
    Ok(Outcome { passed, written: out.written })
}

/// Map a run to a process exit code, reporting errors on stderr.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.passed => EXIT_OK,
        Ok(_) => EXIT_FAILED,
        Err(Error::Config(msg)) => {
            eprintln!("becnet: config error: {msg}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("becnet: {e}");
            EXIT_FAILED
        }
    }
}

/// One acceptance verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// Print one PASS/FAIL line per check; true when all passed.
pub fn report(checks: &[Check]) -> bool {
    for c in checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.passed)
}

/// File sink for one command.
pub(crate) struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), written: Vec::new() }
    }

    /// CSV with a comment header line and a column row.
    pub(crate) fn csv(&mut self, name: &str, comment: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "# {comment}")?;
        writeln!(w, "{}", columns.join(","))?;
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    pub(crate) fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }
}
