use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use widthlab::experiments::{emit_report, kernels::analysis_dir, run_preset, write_kernel_analysis, ExperimentConfig};
use widthlab::Error;

#[derive(Parser)]
#[command(name = "widthlab", version, about = "Width-consistency sweeps for muP and SP MLPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (width, seed) cell of a config and write the report into OUT.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Concurrent cells.
        #[arg(long, env = "WIDTHLAB_WORKERS", default_value_t = 1)]
        workers: usize,
    },
    /// Merge finished run directories into one report.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ensemble eNTK spectra and kernel-flow curves at a checkpointed step.
    Spectra {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        step: u64,
    },
}

fn execute(cli: Cli) -> widthlab::Result<()> {
    match cli.command {
        Command::Run { config, out, workers } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_preset(&cfg, &out, workers)?;
            println!("{} cells, {} diverged; report in {}", summary.cells, summary.diverged, out.display());
            summary.check()
        }
        Command::Report { runs, out } => {
            for path in emit_report(&runs, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Spectra { run, step } => {
            let analysis = write_kernel_analysis(&run, step, false)?;
            for w in &analysis.widths {
                let top = w.report.eigenvalues.first().copied().unwrap_or(f64::NAN);
                println!("N={} lambda_1={top} ensemble_rmse={}", w.width, w.ensemble_rmse);
            }
            println!("{}", analysis_dir(&run, step).display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // Exit code 2 is reserved for partial sweeps, so usage errors exit with 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::PartialSweep { .. }) => {
            eprintln!("widthlab: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("widthlab: {e}");
            ExitCode::FAILURE
        }
    }
}
