//! Config-driven sweeps over widths, seeds and α₀, with CSV/SVG reports.

pub mod config;
pub mod kernels;
pub mod report;
pub mod run;
pub mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Preset, StreamSpec};
pub use kernels::{kernel_analysis, run_after_kernel, write_kernel_analysis, KernelAnalysis, MemberLaw, WidthKernel};
pub use report::{emit_report, sup_loss_gaps, width_summaries, WidthSummary};
pub use run::{
    load_cell_params, load_manifest, load_sweep, run_cell, run_cells, run_sweep, train_cell, CellContext, Divergence, RunManifest,
    RunRecord, StepRecord, SweepOutput,
};

use crate::error::{Error, Result};
use crate::metrics::relative_rmse;

/// Writes `text` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.partial"));
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Logit trajectories divided by α₀, one per α₀ in the config's list.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSweep {
    pub alphas: Vec<f64>,
    pub run_dirs: Vec<PathBuf>,
    /// Per α₀: member logits over recorded steps, seeds outermost, divided by α₀.
    pub trajectories: Vec<Vec<f64>>,
    /// `(i, j, relative_rmse(traj_i, traj_j))` for `i < j`; NaN when a member diverged.
    pub pairwise: Vec<(usize, usize, f64)>,
    pub diverged: usize,
}

/// Trains the first width of `config` at each α₀ in `config.alphas`, one sub-sweep per value.
pub fn run_alpha_sweep(config: &ExperimentConfig, out: &Path, workers: usize) -> Result<AlphaSweep> {
    if config.preset != Preset::AlphaSweep || config.alphas.is_empty() {
        return Err(Error::InvalidConfig("run_alpha_sweep needs an ALPHA_SWEEP config with alphas".into()));
    }
    let mut csv = String::from("alpha0,step,seed,probe_id,channel,normalized_logit\n");
    let mut trajectories = Vec::new();
    let mut run_dirs = Vec::new();
    let mut diverged = 0;
    let channels = config.net.output_dim;
    for (i, &alpha) in config.alphas.iter().enumerate() {
        let mut sub = config.clone();
        sub.net.alpha0 = alpha;
        sub.widths = vec![config.widths[0]];
        let dir = out.join(format!("alpha_{i:02}"));
        let sweep = run_sweep(&sub, &dir, workers)?;
        diverged += sweep.diverged();
        let mut traj = Vec::new();
        for r in &sweep.records {
            for s in &r.steps {
                for (j, v) in s.logits.iter().enumerate() {
                    let z = v / alpha;
                    writeln!(csv, "{alpha},{},{},{},{},{z}", s.step, r.seed, j / channels, j % channels).unwrap();
                    traj.push(z);
                }
            }
        }
        trajectories.push(traj);
        run_dirs.push(dir);
    }
    let mut pairwise = Vec::new();
    let mut rmse_csv = String::from("alpha_a,alpha_b,relative_rmse\n");
    for i in 0..trajectories.len() {
        for j in i + 1..trajectories.len() {
            let r = relative_rmse(&trajectories[i], &trajectories[j]).unwrap_or(f64::NAN);
            writeln!(rmse_csv, "{},{},{r}", config.alphas[i], config.alphas[j]).unwrap();
            pairwise.push((i, j, r));
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_atomic(&out.join("alpha.csv"), &csv)?;
    write_atomic(&out.join("alpha_rmse.csv"), &rmse_csv)?;
    Ok(AlphaSweep { alphas: config.alphas.clone(), run_dirs, trajectories, pairwise, diverged })
}

/// Outcome of [`run_preset`]: how many cells ran and how many diverged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSummary {
    pub cells: usize,
    pub diverged: usize,
}

impl RunSummary {
    pub fn check(&self) -> Result<()> {
        match self.diverged {
            0 => Ok(()),
            n => Err(Error::PartialSweep { diverged: n, total: self.cells }),
        }
    }
}

/// Runs a preset end to end: cells, any kernel analysis it calls for, then the report in `out`.
pub fn run_preset(config: &ExperimentConfig, out: &Path, workers: usize) -> Result<RunSummary> {
    if config.preset == Preset::AlphaSweep {
        let sweep = run_alpha_sweep(config, out, workers)?;
        emit_report(&sweep.run_dirs, out)?;
        let cells = config.alphas.len() * config.seeds_per_width;
        return Ok(RunSummary { cells, diverged: sweep.diverged });
    }
    let sweep = run_sweep(config, out, workers)?;
    let summary = RunSummary { cells: sweep.records.len(), diverged: sweep.diverged() };
    match config.preset {
        Preset::LazySpectral => {
            write_kernel_analysis(out, 0, true)?;
        }
        Preset::AfterKernel if summary.diverged == 0 => {
            write_kernel_analysis(out, 0, false)?;
            run_after_kernel(out)?;
        }
        _ => {}
    }
    emit_report(&[out.to_path_buf()], out)?;
    Ok(summary)
}
