//! Command-line driver: configs, datasets, runs and reports.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::report::{build_report, discover_runs, load_oracle_spec};
use crate::commands::run::{run, Mode, RunOptions};
use crate::config::OracleKind;
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "foldsearch",
    version,
    about = "Feedback-guided protein sequence search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleArg {
    Synthetic,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the search sweep for every case in the config's dataset.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Continue an interrupted run from its log.
        #[arg(long, value_name = "RUN_ID")]
        resume: Option<String>,
        /// Concurrent oracle or proposer calls (default K*N).
        #[arg(long)]
        parallelism: Option<usize>,
        /// One call at a time and no timestamps, so logs are reproducible.
        #[arg(long)]
        serial: bool,
    },
    /// Score one sequence against a reference structure.
    Evaluate {
        /// FASTA file; the first record is used.
        #[arg(long)]
        sequence: PathBuf,
        /// PDB file with the reference backbone.
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, value_enum, default_value = "synthetic")]
        oracle: OracleArg,
    },
    /// Run the random-substitution baseline with the same budgets.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_name = "RUN_ID")]
        resume: Option<String>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        serial: bool,
    },
    /// Summarize finished runs.
    Report {
        /// Run directories, or directories containing them.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Oracle config used to re-score each final sequence.
        #[arg(long)]
        cross_oracle: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Also write report.json, trajectories.csv and substitutions.tsv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn json(value: &impl serde::Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))
}

/// Runs one command, writing results to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let write = |out: &mut dyn Write, text: &str| {
        writeln!(out, "{text}").map_err(|e| CliError::Internal(e.to_string()))
    };
    match cli.command {
        Command::Optimize {
            config,
            resume,
            parallelism,
            serial,
        } => run_and_print(Mode::Optimize, &config, resume, parallelism, serial, out)?,
        Command::Baseline {
            config,
            resume,
            parallelism,
            serial,
        } => run_and_print(Mode::Baseline, &config, resume, parallelism, serial, out)?,
        Command::Evaluate {
            sequence,
            reference,
            oracle,
        } => {
            let kind = match oracle {
                OracleArg::Synthetic => OracleKind::Synthetic,
                OracleArg::Remote => OracleKind::Remote,
            };
            write(
                out,
                &json(&commands::evaluate::evaluate(&sequence, &reference, kind)?)?,
            )?;
        }
        Command::Report {
            runs,
            cross_oracle,
            format,
            out: out_dir,
        } => {
            let spec = cross_oracle.as_deref().map(load_oracle_spec).transpose()?;
            let dirs = discover_runs(&runs)?;
            let report = build_report(&dirs, spec.as_ref(), Default::default())?;
            if let Some(dir) = out_dir {
                report.write_files(&dir)?;
            }
            match format {
                Format::Text => write(out, report.render_text().trim_end())?,
                Format::Json => write(out, &json(&report)?)?,
            }
        }
    }
    Ok(())
}

fn run_and_print(
    mode: Mode,
    config: &std::path::Path,
    resume: Option<String>,
    parallelism: Option<usize>,
    serial: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let opts = RunOptions {
        resume,
        parallelism,
        serial,
    };
    for summary in run(mode, config, &opts)? {
        writeln!(out, "{}", json(&summary)?).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}
