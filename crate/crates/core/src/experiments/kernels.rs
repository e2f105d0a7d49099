//! Ensemble eNTK spectra and kernel-flow predictions for a finished sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::{cell_dir, checkpoint_dir, ensemble_table, load_cell_params, load_sweep, RunManifest, RunRecord};
use super::{write_atomic, ExperimentConfig};
use crate::error::{Error, Result};
use crate::metrics::relative_rmse;
use crate::net::effective_lr;
use crate::numerics::eigen::DEFAULT_TOL;
use crate::numerics::sym_eig;
use crate::spectral::{
    ensemble_avg, entk_layerwise, flow_from_eigen, lazy_loss_curve, report_from_eigen, spectral_report, FlowResult, KernelMatrix,
    SpectralReport,
};
use crate::tasks::probe_set;

/// Lazy-law check for one member: measured loss against `Σ v_k² e^{−2λ_k t}` from its own kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct MemberLaw {
    pub seed: u64,
    pub steps: Vec<u64>,
    pub measured: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl MemberLaw {
    /// Largest `|measured − predicted| / measured` over steps with `measured > floor`.
    pub fn max_rel_error(&self, floor: f64) -> f64 {
        self.measured.iter().zip(&self.predicted).filter(|(m, _)| **m > floor).map(|(m, p)| (m - p).abs() / m).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WidthKernel {
    pub width: usize,
    /// Spectrum of the ensemble-averaged FLOW kernel against the probe targets.
    pub report: SpectralReport<f64>,
    /// Flow from `Δ(0) = y` under the averaged kernel, at the recorded steps.
    pub flow: FlowResult<f64>,
    /// Per-member lazy-law comparisons, when requested.
    pub members: Vec<MemberLaw>,
    /// Measured ensemble loss at the recorded steps (only meaningful from step 0).
    pub ensemble_loss: Vec<f64>,
    /// `relative_rmse` of the seed-averaged probe logits against `y − Δ(t)` of the flow, stacked over steps.
    pub ensemble_rmse: f64,
}

impl WidthKernel {
    /// Flow loss on the MSE scale (mean over points and channels).
    pub fn flow_loss(&self, channels: usize) -> Vec<f64> {
        self.flow.loss.iter().map(|l| l / channels as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelAnalysis {
    pub step: u64,
    pub channels: usize,
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub widths: Vec<WidthKernel>,
}

/// FLOW-normalized eNTKs of every cell at one width.
fn member_kernels(
    run_dir: &Path,
    cfg: &ExperimentConfig,
    width: usize,
    step: u64,
    probes: &crate::Matrix,
) -> Result<Vec<KernelMatrix<f64>>> {
    (0..cfg.seeds_per_width as u64)
        .map(|seed| {
            let net = cfg.cell_net(width, seed);
            let params = load_cell_params(run_dir, cfg, width, seed, step)?;
            let ratio = effective_lr(&net, &cfg.schedule) / cfg.schedule.eta0;
            entk_layerwise(&params, &net, probes)?.to_flow(ratio)
        })
        .collect()
}

/// Kernels at `step` for every width of the sweep in `run_dir`.
///
/// `per_member` adds the lazy-law comparison of each member against its own kernel.
pub fn kernel_analysis(run_dir: &Path, step: u64, per_member: bool) -> Result<KernelAnalysis> {
    let (manifest, records) = load_sweep(run_dir)?;
    analyze(run_dir, &manifest, &records, step, per_member)
}

fn recorded_steps(records: &[RunRecord]) -> Vec<u64> {
    records.iter().max_by_key(|r| r.steps.len()).map(|r| r.steps.iter().map(|s| s.step).collect()).unwrap_or_default()
}

fn analyze(run_dir: &Path, manifest: &RunManifest, records: &[RunRecord], step: u64, per_member: bool) -> Result<KernelAnalysis> {
    let cfg = &manifest.config;
    let teacher = cfg.task.teacher()?;
    let probes = probe_set(&cfg.task, &teacher, cfg.probe_seed, cfg.probe_count)?;
    let y = probes.y.as_slice().to_vec();
    let channels = cfg.net.output_dim;
    let steps: Vec<u64> = recorded_steps(records).into_iter().filter(|s| *s >= step).collect();
    let times: Vec<f64> = steps.iter().map(|s| (s - step) as f64 * cfg.time_per_step()).collect();
    let table = ensemble_table(y.clone(), records);
    let mut widths = Vec::new();
    for &width in &cfg.widths {
        if let Some(r) = records.iter().find(|r| step != 0 && r.width == width && !r.checkpoints.contains(&step)) {
            return Err(Error::MissingCheckpoint(checkpoint_dir(&cell_dir(run_dir, width, r.seed), step)));
        }
        let kernels = member_kernels(run_dir, cfg, width, step, &probes.x)?;
        let mut members = Vec::new();
        if per_member {
            for (seed, k) in kernels.iter().enumerate() {
                let Some(rec) = records.iter().find(|r| r.width == width && r.seed == seed as u64) else { continue };
                let report = spectral_report(k, &y)?;
                let (st, measured): (Vec<u64>, Vec<f64>) =
                    rec.steps.iter().filter(|s| s.step >= step).map(|s| (s.step, s.probe_loss)).unzip();
                let t: Vec<f64> = st.iter().map(|s| (s - step) as f64 * cfg.time_per_step()).collect();
                let predicted = lazy_loss_curve(&report, &t).into_iter().map(|l| l / channels as f64).collect();
                members.push(MemberLaw { seed: seed as u64, steps: st, measured, predicted });
            }
        }
        let avg = ensemble_avg(&kernels)?;
        let eig = sym_eig(&avg.matrix, DEFAULT_TOL)?;
        let report = report_from_eigen(&eig, avg.points(), &y)?;
        let flow = flow_from_eigen(&eig, avg.points(), &y, &times)?;
        let mut measured = Vec::new();
        let mut predicted = Vec::new();
        let mut ensemble_loss = Vec::new();
        for (i, s) in steps.iter().enumerate() {
            let Some(agg) = table.aggregate(width, *s) else { continue };
            ensemble_loss.push(agg.ensemble_loss);
            measured.extend_from_slice(&agg.ensemble_logits);
            predicted.extend(y.iter().zip(&flow.residuals[i]).map(|(t, d)| t - d));
        }
        let ensemble_rmse = if predicted.is_empty() { f64::NAN } else { relative_rmse(&measured, &predicted)? };
        widths.push(WidthKernel { width, report, flow, members, ensemble_loss, ensemble_rmse });
    }
    Ok(KernelAnalysis { step, channels, steps, times, widths })
}

impl KernelAnalysis {
    /// `width,k,lambda,coeff_sq,cumulative_power` for each width's averaged kernel.
    pub fn spectra_csv(&self) -> String {
        let mut s = String::from("width,k,lambda,coeff_sq,cumulative_power\n");
        for w in &self.widths {
            w.report.csv_rows(&format!("{},", w.width), &mut s);
        }
        s
    }

    /// `width,step,time,flow_loss,ensemble_loss`; the last column is empty past the measured steps.
    pub fn flow_csv(&self) -> String {
        let mut s = String::from("width,step,time,flow_loss,ensemble_loss\n");
        for w in &self.widths {
            let flow = w.flow_loss(self.channels);
            for (i, (step, t)) in self.steps.iter().zip(&self.times).enumerate() {
                let measured = w.ensemble_loss.get(i).map(|v| v.to_string()).unwrap_or_default();
                writeln!(s, "{},{step},{t},{},{measured}", w.width, flow[i]).unwrap();
            }
        }
        s
    }

    /// `width,seed,step,time,measured_loss,predicted_loss` for the per-member lazy law.
    pub fn lazy_csv(&self, time_per_step: f64) -> String {
        let mut s = String::from("width,seed,step,time,measured_loss,predicted_loss\n");
        for w in &self.widths {
            for m in &w.members {
                for ((st, me), pr) in m.steps.iter().zip(&m.measured).zip(&m.predicted) {
                    let t = (st - self.step) as f64 * time_per_step;
                    writeln!(s, "{},{},{st},{t},{me},{pr}", w.width, m.seed).unwrap();
                }
            }
        }
        s
    }
}

pub fn analysis_dir(run_dir: &Path, step: u64) -> PathBuf {
    run_dir.join("kernels").join(format!("step_{step:08}"))
}

/// Runs [`kernel_analysis`] and writes its CSVs under `run_dir/kernels/step_S/`.
pub fn write_kernel_analysis(run_dir: &Path, step: u64, per_member: bool) -> Result<KernelAnalysis> {
    let (manifest, records) = load_sweep(run_dir)?;
    let analysis = analyze(run_dir, &manifest, &records, step, per_member)?;
    let dir = analysis_dir(run_dir, step);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_atomic(&dir.join("spectra.csv"), &analysis.spectra_csv())?;
    write_atomic(&dir.join("flow.csv"), &analysis.flow_csv())?;
    if per_member {
        write_atomic(&dir.join("lazy.csv"), &analysis.lazy_csv(manifest.config.time_per_step()))?;
    }
    Ok(analysis)
}

/// After kernels: final-step eNTKs, averaged per width, flowed from the probe labels.
pub fn run_after_kernel(run_dir: &Path) -> Result<KernelAnalysis> {
    let manifest = super::run::load_manifest(run_dir)?;
    write_kernel_analysis(run_dir, manifest.config.schedule.steps, false)
}
