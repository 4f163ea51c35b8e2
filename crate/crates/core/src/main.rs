// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use driftseg::bench::{read_rows, run_experiment_with, run_tradeoff_sweep, summarize, write_curve, write_rows, write_summary, ExperimentConfig};
use driftseg::datagen::{generate, write_csv, StreamSpec};

#[derive(Parser)]
#[command(name = "driftseg", version, about = "Segment and batch selection for drifting data streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method and seed, writing one CSV row per run.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; falls back to `out` in the config, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reject dataset shapes that differ from the standard table.
        #[arg(long)]
        strict_table1: bool,
        /// Write per-epoch selection traces as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Accuracy against batch budget for the configured selection method.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        fractions: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean and standard deviation per dataset and method.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated stream as CSV.
    Generate {
        /// Preset dataset name.
        #[arg(long, conflicts_with = "spec")]
        dataset: Option<String>,
        /// TOML stream spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn io::Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, out, strict_table1, trace } => {
            let mut config = ExperimentConfig::load(&config)?;
            config.strict_table1 |= strict_table1;
            let mut trace_out = trace.map(|p| File::create(p).map(BufWriter::new)).transpose()?;
            let rows = run_experiment_with(&config, |record| {
                if let Some(w) = trace_out.as_mut() {
                    serde_json::to_writer(&mut *w, &record)?;
                    w.write_all(b"\n")?;
                }
                Ok(())
            })?;
            if let Some(mut w) = trace_out {
                w.flush()?;
            }
            write_rows(&rows, output(out.as_ref().or(config.out.as_ref()))?)?;
        }
        Command::Sweep { config, fractions, out } => {
            let config = ExperimentConfig::load(&config)?;
            let curve = run_tradeoff_sweep(&config, &fractions)?;
            write_curve(&curve, output(out.as_ref())?)?;
        }
        Command::Summarize { input, out } => {
            let rows = read_rows(File::open(&input)?)?;
            write_summary(&summarize(&rows)?, output(out.as_ref())?)?;
        }
        Command::Generate { dataset, spec, seed, out } => {
            let spec = match (dataset, spec) {
                (Some(name), _) => StreamSpec::preset(&name, seed)?,
                (None, Some(path)) => {
                    let mut s = StreamSpec::load(&path)?;
                    s.seed = seed;
                    s
                }
                (None, None) => anyhow::bail!("pass --dataset or --spec"),
            };
            write_csv(&generate(&spec)?, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
