use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use causal_epig_cli::config::ExperimentConfig;
use causal_epig_cli::runner::{format_row, replay_cell, resolve_out_dir, run_matrix, Manifest, RunOptions, RESULTS_FILE};
use causal_epig_cli::{gendata, summary};

#[derive(Parser)]
#[command(name = "causal-epig", version, about = "Active learning benchmarks for CATE estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment configuration.
    Run {
        config: PathBuf,
        /// Output directory (default: config `output_dir`, else $CAUSAL_EPIG_OUTPUT/<config name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Resume into an existing output directory, skipping completed cells.
        #[arg(long)]
        append: bool,
        /// Number of cells run concurrently.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Aggregate a results file into summary.csv and improvement.csv.
    Summarize {
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one generated dataset with ground truth to CSV.
    GenData {
        dataset: String,
        output: PathBuf,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        shift: bool,
        /// Covariate file for ihdp/actg.
        #[arg(long)]
        covariates: Option<PathBuf>,
    },
    /// Re-execute one cell of a manifest and print its result rows.
    Replay { manifest: PathBuf, cell: usize },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, append, jobs } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let name = config.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            let out_dir = resolve_out_dir(out.as_deref(), &cfg, name);
            let report = run_matrix(&cfg, &RunOptions { out_dir: out_dir.clone(), append, jobs })?;
            eprintln!(
                "{} cells ({} run, {} already complete, {} failed); results in {}",
                report.total,
                report.ran,
                report.skipped,
                report.failed,
                out_dir.join(RESULTS_FILE).display()
            );
            Ok(if report.failed > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Summarize { results, out } => {
            let (s, i) = summary::emit_summary(&results, out.as_deref())?;
            eprintln!("wrote {} and {}", s.display(), i.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::GenData { dataset, output, rows, seed, shift, covariates } => {
            let data = gendata::generate(&dataset, shift, rows, seed, covariates.as_deref())?;
            gendata::write_dataset(&dataset, &data, &output)?;
            eprintln!("wrote {} rows to {}", data.len(), output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { manifest, cell } => {
            let m = Manifest::load(&manifest)?;
            let mut stdout = std::io::stdout().lock();
            for row in replay_cell(&m, cell)? {
                match writeln!(stdout, "{}", format_row(&row)?) {
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => break,
                    other => other?,
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
