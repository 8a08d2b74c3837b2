use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use icad_cli::{
    generate, run_bench, run_detect, run_plot_data, run_sweep, CorpusSummary, DetectorFlags,
    FileConfig, RunConfig,
};
use icad_core::synthetic::CorpusSpec;

/// Conformal anomaly detection for univariate time series.
#[derive(Debug, Parser)]
#[command(name = "icad", version)]
struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one series and write a results CSV.
    Detect {
        #[arg(short, long)]
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        detector: DetectorFlags,
    },
    /// Score a labelled corpus at a fixed threshold.
    Bench {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// Also write per-file results under this directory.
        #[arg(long)]
        results_dir: Option<PathBuf>,
        /// JSON summary file; stdout when omitted.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        detector: DetectorFlags,
    },
    /// Score a labelled corpus at the best threshold for each profile.
    Sweep {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        detector: DetectorFlags,
    },
    /// Join a results file with its labels for plotting.
    Plotdata {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Key of the file in the label document.
        #[arg(long)]
        key: String,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a seeded synthetic labelled corpus.
    Generate {
        #[arg(short, long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        files: usize,
        #[arg(long, default_value_t = 3000)]
        length: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_summary(summary: &CorpusSummary, path: Option<&Path>) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, summary)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = cli.config.as_deref().map(FileConfig::load).transpose()?;
    let file = file.as_ref();
    match cli.command {
        Command::Detect {
            input,
            output,
            detector,
        } => {
            let cfg = RunConfig::resolve(file, &detector, None, None, None)?;
            let mut out = sink(output.as_deref())?;
            run_detect(&input, &cfg, &mut out)?;
            out.flush()?;
        }
        Command::Bench {
            data_dir,
            labels,
            threshold,
            results_dir,
            summary,
            detector,
        } => {
            let cfg = RunConfig::resolve(file, &detector, threshold, None, None)?;
            let s = run_bench(&data_dir, &labels, &cfg, results_dir.as_deref())?;
            emit_summary(&s, summary.as_deref())?;
        }
        Command::Sweep {
            data_dir,
            labels,
            summary,
            detector,
        } => {
            let cfg = RunConfig::resolve(file, &detector, None, None, None)?;
            let s = run_sweep(&data_dir, &labels, &cfg)?;
            emit_summary(&s, summary.as_deref())?;
        }
        Command::Plotdata {
            results,
            labels,
            key,
            threshold,
            output,
        } => {
            let cfg = RunConfig::resolve(file, &DetectorFlags::default(), threshold, None, None)?;
            let mut out = sink(output.as_deref())?;
            run_plot_data(&results, &labels, &key, cfg.threshold, &mut out)?;
            out.flush()?;
        }
        Command::Generate {
            output_dir,
            files,
            length,
            seed,
        } => {
            let cfg = RunConfig::resolve(file, &DetectorFlags::default(), None, None, seed)?;
            let labels = generate(
                &output_dir,
                CorpusSpec {
                    files,
                    length,
                    seed: cfg.seed,
                },
            )?;
            eprintln!("wrote {files} files and {}", labels.display());
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
