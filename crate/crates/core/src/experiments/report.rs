//! CSV and SVG reports over finished sweep directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::kernels::analysis_dir;
use super::run::{ensemble_table, load_cell_params, load_sweep, RunManifest, RunRecord};
use super::svg::{LinePlot, Series};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::metrics::{bias_variance, cka, feature_kernel, preact_stats, relative_rmse, EnsembleTable, PreactSnapshot};
use crate::net::forward;
use crate::numerics::DenseMatrix;
use crate::tasks::probe_set;

pub const LOSSES_HEADER: &str = "step,width,seed,train_loss,probe_loss";
pub const LOGITS_HEADER: &str = "step,width,seed,probe_id,channel,logit";
pub const SPECTRA_HEADER: &str = "width,k,lambda,coeff_sq,cumulative_power";
pub const BIASVAR_HEADER: &str = "step,width,mean_single_loss,ensemble_loss,variance,bias";
pub const PREACT_HEADER: &str = "width,layer,probe_id,mean,var,skew,kurtosis,w1_gauss";
pub const CONVERGENCE_HEADER: &str = "width,ensemble_loss,mean_single_loss,mean_relative_rmse,ensemble_relative_rmse,mean_cka,sup_loss_gap";

/// Width-level comparison against the widest network at the final step.
#[derive(Clone, Debug, PartialEq)]
pub struct WidthSummary {
    pub width: usize,
    pub ensemble_loss: f64,
    pub mean_single_loss: f64,
    /// Mean over members of `relative_rmse(member logits, widest ensemble logits)`.
    pub mean_relative_rmse: f64,
    pub ensemble_relative_rmse: f64,
    /// Mean CKA of last-layer feature kernels to the widest members' averaged kernel.
    pub mean_cka: Option<f64>,
    /// Seed-matched `sup_t |L_N(t) − L_widest(t)|` of the training loss, averaged over seeds.
    pub sup_loss_gap: f64,
}

/// Seed-matched training-loss gap to the widest width; infinite when either cell diverged.
pub fn sup_loss_gaps(records: &[RunRecord]) -> Vec<(usize, f64)> {
    let mut widths: Vec<usize> = records.iter().map(|r| r.width).collect();
    widths.dedup();
    let Some(&widest) = widths.last() else { return Vec::new() };
    let by_key: BTreeMap<(usize, u64), &RunRecord> = records.iter().map(|r| ((r.width, r.seed), r)).collect();
    widths
        .iter()
        .map(|&w| {
            let gaps: Vec<f64> = by_key
                .iter()
                .filter(|((rw, _), _)| *rw == w)
                .map(|((_, seed), r)| match by_key.get(&(widest, *seed)) {
                    Some(wide) if r.divergence.is_none() && wide.divergence.is_none() => {
                        r.steps.iter().zip(&wide.steps).map(|(a, b)| (a.train_loss - b.train_loss).abs()).fold(0.0, f64::max)
                    }
                    _ => f64::INFINITY,
                })
                .collect();
            (w, gaps.iter().sum::<f64>() / gaps.len().max(1) as f64)
        })
        .collect()
}

/// Last-layer feature kernels of every surviving member at `step`, keyed by `(width, seed)`.
pub fn final_feature_kernels(
    run_dir: &Path,
    manifest: &RunManifest,
    records: &[RunRecord],
    step: u64,
) -> Result<BTreeMap<(usize, u64), DenseMatrix<f64>>> {
    let cfg = &manifest.config;
    let teacher = cfg.task.teacher()?;
    let probes = probe_set(&cfg.task, &teacher, cfg.probe_seed, cfg.probe_count)?;
    let mut out = BTreeMap::new();
    for r in records.iter().filter(|r| r.divergence.is_none() && r.checkpoints.contains(&step)) {
        let net = cfg.cell_net(r.width, r.seed);
        let params = load_cell_params(run_dir, cfg, r.width, r.seed, step)?;
        let trace = forward(&params, &net, &probes.x)?;
        out.insert((r.width, r.seed), feature_kernel(&trace, net.hidden_layers())?.matrix);
    }
    Ok(out)
}

/// Per-width comparisons with the widest network at the final step.
pub fn width_summaries(
    table: &EnsembleTable,
    records: &[RunRecord],
    step: u64,
    kernels: Option<&BTreeMap<(usize, u64), DenseMatrix<f64>>>,
) -> Result<Vec<WidthSummary>> {
    let widths = table.widths();
    let Some(&widest) = widths.last() else { return Ok(Vec::new()) };
    let Some(reference) = table.aggregate(widest, step) else { return Ok(Vec::new()) };
    let reference_kernel = kernels.and_then(|k| {
        let mats: Vec<&DenseMatrix<f64>> = k.iter().filter(|((w, _), _)| *w == widest).map(|(_, m)| m).collect();
        let first = mats.first()?;
        let mut avg = DenseMatrix::zeros(first.rows(), first.cols());
        for m in &mats {
            avg.add_scaled(m, 1.0 / mats.len() as f64).ok()?;
        }
        Some(avg)
    });
    let gaps: BTreeMap<usize, f64> = sup_loss_gaps(records).into_iter().collect();
    let mut out = Vec::new();
    for w in widths {
        let Some(agg) = table.aggregate(w, step) else { continue };
        let members = table.members(w, step);
        let rmses = members.iter().map(|m| relative_rmse(&m.logits, &reference.ensemble_logits)).collect::<Result<Vec<f64>>>()?;
        let mean_cka = match (&reference_kernel, kernels) {
            (Some(rk), Some(k)) => {
                let vals = k.iter().filter(|((kw, _), _)| *kw == w).map(|(_, m)| cka(m, rk)).collect::<Result<Vec<f64>>>()?;
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            }
            _ => None,
        };
        out.push(WidthSummary {
            width: w,
            ensemble_loss: agg.ensemble_loss,
            mean_single_loss: agg.mean_single_loss,
            mean_relative_rmse: rmses.iter().sum::<f64>() / rmses.len() as f64,
            ensemble_relative_rmse: relative_rmse(&agg.ensemble_logits, &reference.ensemble_logits)?,
            mean_cka,
            sup_loss_gap: gaps.get(&w).copied().unwrap_or(f64::INFINITY),
        });
    }
    Ok(out)
}

/// Step-0 preactivations pooled over seeds per `(width, layer, probe)`.
pub fn pooled_preacts(records: &[RunRecord], step: u64) -> Vec<PreactSnapshot> {
    let mut pooled: BTreeMap<(usize, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        for p in r.preacts.iter().filter(|p| p.step == step) {
            let s = &p.snapshot;
            pooled.entry((s.width, s.layer, s.probe_id)).or_default().extend_from_slice(&s.values);
        }
    }
    pooled.into_iter().map(|((width, layer, probe_id), values)| PreactSnapshot { width, layer, probe_id, values }).collect()
}

struct RunData {
    dir: PathBuf,
    manifest: RunManifest,
    records: Vec<RunRecord>,
    table: EnsembleTable,
}

fn latest_spectra(dir: &Path, steps: u64) -> Option<String> {
    for step in [steps, 0] {
        if let Ok(text) = fs::read_to_string(analysis_dir(dir, step).join("spectra.csv")) {
            return Some(text);
        }
    }
    None
}

fn spectra_plot(csv: &str, plot: &mut LinePlot) {
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if let (Some(w), Some(k), Some(c)) = (f.first(), f.get(1).and_then(|v| v.parse().ok()), f.get(4).and_then(|v| v.parse().ok())) {
            series.entry(w.to_string()).or_default().push((k, c));
        }
    }
    let mut entries: Vec<(usize, Vec<(f64, f64)>)> = series.into_iter().filter_map(|(w, pts)| Some((w.parse().ok()?, pts))).collect();
    entries.sort_by_key(|e| e.0);
    for (w, pts) in entries {
        plot.push(Series::new(format!("N={w}"), pts));
    }
}

/// Writes the report CSVs and SVGs for `run_dirs` into `out`.
///
/// Every input is loaded before anything is written, so a malformed run leaves `out` untouched.
pub fn emit_report(run_dirs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if run_dirs.is_empty() {
        return Err(Error::EmptyInput("report needs at least one run directory"));
    }
    let mut runs = Vec::new();
    for dir in run_dirs {
        let (manifest, records) = load_sweep(dir)?;
        let teacher = manifest.config.task.teacher()?;
        let probes = probe_set(&manifest.config.task, &teacher, manifest.config.probe_seed, manifest.config.probe_count)?;
        let table = ensemble_table(probes.y.into_vec(), &records);
        runs.push(RunData { dir: dir.clone(), manifest, records, table });
    }

    let mut losses = format!("{LOSSES_HEADER}\n");
    let mut logits = format!("{LOGITS_HEADER}\n");
    let mut biasvar = format!("{BIASVAR_HEADER}\n");
    let mut preact = format!("{PREACT_HEADER}\n");
    let mut convergence = format!("{CONVERGENCE_HEADER}\n");
    let mut spectra: Option<String> = None;
    let mut loss_plot = LinePlot::new("Ensemble probe loss", "step", "loss").log(false, true);
    let mut rmse_plot = LinePlot::new("Relative RMSE to widest", "width N", "relative RMSE").log(true, true);
    let mut bv_plot = LinePlot::new("Bias and variance at final step", "width N", "loss").log(true, true);
    let tag = |i: usize, s: String| if runs.len() > 1 { format!("run{i} {s}") } else { s };

    for (i, run) in runs.iter().enumerate() {
        let cfg = &run.manifest.config;
        let channels = cfg.net.output_dim;
        for r in &run.records {
            for s in &r.steps {
                writeln!(losses, "{},{},{},{},{}", s.step, r.width, r.seed, s.train_loss, s.probe_loss).unwrap();
                for (j, v) in s.logits.iter().enumerate() {
                    writeln!(logits, "{},{},{},{},{},{v}", s.step, r.width, r.seed, j / channels, j % channels).unwrap();
                }
            }
        }
        let widths = run.table.widths();
        for &w in &widths {
            let pts = run.table.steps(w).into_iter().filter_map(|s| Some((s as f64, run.table.aggregate(w, s)?.ensemble_loss))).collect();
            loss_plot.push(Series::new(tag(i, format!("N={w}")), pts));
        }
        let final_step = cfg.schedule.steps;
        if cfg.seeds_per_width >= 2 {
            if let Some(&widest) = widths.last() {
                let rows = bias_variance(&run.table, widest)?;
                for r in &rows {
                    writeln!(biasvar, "{},{},{},{},{},{}", r.step, r.width, r.mean_single_loss, r.ensemble_loss, r.variance, r.bias)
                        .unwrap();
                }
                let at_end: Vec<_> = rows.iter().filter(|r| r.step == final_step).collect();
                bv_plot.push(Series::new(tag(i, "variance".into()), at_end.iter().map(|r| (r.width as f64, r.variance)).collect()));
                bv_plot.push(Series::new(tag(i, "bias".into()), at_end.iter().map(|r| (r.width as f64, r.bias)).collect()));
            }
        }
        for snap in pooled_preacts(&run.records, 0) {
            // Too few pooled samples for moments: skip the row rather than fail the report.
            if let Ok(s) = preact_stats(&snap) {
                writeln!(
                    preact,
                    "{},{},{},{},{},{},{},{}",
                    snap.width, snap.layer, snap.probe_id, s.mean, s.var, s.skew, s.kurtosis, s.w1_gauss
                )
                .unwrap();
            }
        }
        let kernels = final_feature_kernels(&run.dir, &run.manifest, &run.records, final_step)?;
        let summaries = width_summaries(&run.table, &run.records, final_step, Some(&kernels))?;
        for s in &summaries {
            let cka = s.mean_cka.map(|c| c.to_string()).unwrap_or_default();
            writeln!(
                convergence,
                "{},{},{},{},{},{cka},{}",
                s.width, s.ensemble_loss, s.mean_single_loss, s.mean_relative_rmse, s.ensemble_relative_rmse, s.sup_loss_gap
            )
            .unwrap();
        }
        let measured: Vec<(f64, f64)> =
            summaries.iter().filter(|s| s.mean_relative_rmse > 0.0).map(|s| (s.width as f64, s.mean_relative_rmse)).collect();
        if let Some(&(n0, r0)) = measured.first() {
            let ends: Vec<f64> = measured.iter().map(|p| p.0).collect();
            rmse_plot.push(Series::new(tag(i, "single vs widest ensemble".into()), measured.clone()));
            rmse_plot.push(Series::new("1/sqrt(N)", ends.iter().map(|n| (*n, r0 * (n0 / n).sqrt())).collect()).dashed());
            rmse_plot.push(Series::new("1/N", ends.iter().map(|n| (*n, r0 * n0 / n)).collect()).dashed());
        }
        if spectra.is_none() {
            spectra = latest_spectra(&run.dir, final_step);
        }
    }

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files: Vec<(&str, String)> = vec![
        ("losses.csv", losses),
        ("logits.csv", logits),
        ("biasvar.csv", biasvar),
        ("preact.csv", preact),
        ("convergence.csv", convergence),
        ("loss_vs_step.svg", loss_plot.render()),
        ("rmse_vs_width.svg", rmse_plot.render()),
        ("biasvar_vs_width.svg", bv_plot.render()),
    ];
    if let Some(text) = spectra {
        let mut plot = LinePlot::new("Cumulative target power C(k)", "k", "C(k)").log(true, false);
        spectra_plot(&text, &mut plot);
        files.push(("spectra.csv", text));
        files.push(("cumulative_power.svg", plot.render()));
    }
    let mut written = Vec::new();
    for (name, text) in files {
        let path = out.join(name);
        write_atomic(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}
