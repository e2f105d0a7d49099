//! Acceptance run: one `criterion N: PASS|FAIL (...)` line per criterion.
//!
//! A measured FAIL does not fail the process; only errors and panics do.
//! `ACCEPTANCE_ONLY=3,8` restricts the run to a subset of criteria.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use tempfile::TempDir;
use widthlab::experiments::report::{final_feature_kernels, pooled_preacts};
use widthlab::experiments::{
    kernel_analysis, load_sweep, run_preset, run_sweep, width_summaries, ExperimentConfig, KernelAnalysis, Preset, SweepOutput,
    WidthSummary,
};
use widthlab::metrics::{bias_variance, feature_kernel, gradient_kernel, input_kernel, loglog_slope, preact_stats, sharpness};
use widthlab::net::{
    effective_lr, feature_movement, forward, init_params, loss_and_grads, per_output_jacobian, sgd_step, NetConfig, ParamSet,
    Parameterization,
};
use widthlab::numerics::eigen::DEFAULT_TOL;
use widthlab::numerics::{sym_eig, DenseMatrix, RngState};
use widthlab::spectral::entk;
use widthlab::tasks::{online_batch, probe_set, StreamMode, TaskSpec};
use widthlab::Result;

type Verdict = Result<(bool, String)>;

const RICH_WIDTHS: [usize; 6] = [32, 64, 128, 256, 512, 1024];
const RICH_SEEDS: usize = 8;
const RICH_STEPS: u64 = 3000;

/// Sweeps shared by several criteria, trained on first use.
struct Shared {
    root: TempDir,
    mup: Option<(PathBuf, SweepOutput)>,
    sp: Option<(PathBuf, SweepOutput)>,
}

impl Shared {
    fn rich_config(preset: Preset) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(preset);
        cfg.widths = RICH_WIDTHS.to_vec();
        cfg.seeds_per_width = RICH_SEEDS;
        cfg.schedule.steps = RICH_STEPS;
        cfg.probe_count = 128;
        cfg.record_every = 50;
        cfg
    }

    fn sweep(&mut self, preset: Preset) -> Result<&(PathBuf, SweepOutput)> {
        let slot = if preset == Preset::SpContrast { &mut self.sp } else { &mut self.mup };
        if slot.is_none() {
            let dir = self.root.path().join(format!("{preset:?}"));
            let out = run_sweep(&Self::rich_config(preset), &dir, 1)?;
            *slot = Some((dir, out));
        }
        Ok(slot.as_ref().unwrap())
    }

    fn mup_summaries(&mut self) -> Result<Vec<WidthSummary>> {
        let (dir, out) = self.sweep(Preset::RichConsistency)?;
        let (manifest, records) = load_sweep(dir)?;
        let kernels = final_feature_kernels(dir, &manifest, &records, RICH_STEPS)?;
        width_summaries(&out.table, &out.records, RICH_STEPS, Some(&kernels))
    }
}

fn net(param: Parameterization, width: usize, d: usize, c: usize, seed: u64) -> NetConfig {
    NetConfig { depth: 3, width, input_dim: d, output_dim: c, alpha0: 1.0, parameterization: param, activation: Default::default(), seed }
}

fn gaussian(seed: u64, rows: usize, cols: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_vec(rows, cols, RngState::new(seed).gaussian_stream(rows * cols)).unwrap()
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

fn central<F: Fn(&[f64]) -> Vec<f64>>(theta: &[f64], h: f64, f: F) -> Vec<Vec<f64>> {
    (0..theta.len())
        .map(|i| {
            let (mut tp, mut tm) = (theta.to_vec(), theta.to_vec());
            tp[i] += h;
            tm[i] -= h;
            f(&tp).iter().zip(f(&tm)).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect()
}

fn widths_f(ws: &[usize]) -> Vec<f64> {
    ws.iter().map(|w| *w as f64).collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn criterion_1() -> Verdict {
    let mut worst_grad: f64 = 0.0;
    let mut worst_jac: f64 = 0.0;
    let mut worst_sharp: f64 = 0.0;
    for param in [Parameterization::Mup, Parameterization::Sp] {
        let cfg = net(param, 16, 5, 2, 3);
        let p = init_params::<f64>(&cfg);
        let (x, y) = (gaussian(1, 6, 5), gaussian(2, 6, 2));
        let theta = p.flatten();
        let (_, g) = loss_and_grads(&p, &cfg, &x, &y)?;
        // Reported gradients are of loss/2.
        let g: Vec<f64> = g.flatten().iter().map(|v| 2.0 * v).collect();
        let fd: Vec<f64> = central(&theta, 1e-6, |t| vec![loss_and_grads(&p.unflatten(t).unwrap(), &cfg, &x, &y).unwrap().0])
            .into_iter()
            .map(|v| v[0])
            .collect();
        worst_grad = worst_grad.max(rel_l2(&g, &fd));

        let jac = per_output_jacobian(&p, &cfg, &x)?;
        let cols = central(&theta, 1e-6, |t| forward(&p.unflatten(t).unwrap(), &cfg, &x).unwrap().outputs.into_vec());
        let fd_jac: Vec<f64> = (0..jac.rows()).flat_map(|r| cols.iter().map(move |c| c[r])).collect();
        worst_jac = worst_jac.max(rel_l2(jac.as_slice(), &fd_jac));

        // Dense Hessian of the full loss from differences of exact gradients.
        let small = net(param, 8, 2, 1, 5);
        let q = init_params::<f64>(&small);
        let (xs, ys) = (gaussian(7, 10, 2), gaussian(8, 10, 1));
        let grad = |t: &[f64]| -> Vec<f64> {
            loss_and_grads(&q.unflatten(t).unwrap(), &small, &xs, &ys).unwrap().1.flatten().iter().map(|v| 2.0 * v).collect()
        };
        let cols = central(&q.flatten(), 1e-5, grad);
        let n = cols.len();
        let hess = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (cols[j][i] + cols[i][j]));
        let top = sym_eig(&hess, DEFAULT_TOL)?.values[0];
        let s = sharpness(&q, &small, &xs, &ys)?;
        worst_sharp = worst_sharp.max((s - top).abs() / top.abs());
    }
    let pass = worst_grad < 1e-5 && worst_jac < 1e-5 && worst_sharp < 0.02;
    Ok((pass, format!("grad rel {worst_grad:.1e}, jacobian rel {worst_jac:.1e}, sharpness rel {worst_sharp:.1e}")))
}

/// `Σ_ℓ s_ℓ² (n_ℓ Φ^ℓ) ∘ (G^{ℓ+1}/N)` plus the readout term `s_L² N Φ^L`.
fn ntk_from_layers(p: &ParamSet<f64>, cfg: &NetConfig, x: &DenseMatrix<f64>) -> Result<DenseMatrix<f64>> {
    let trace = forward(p, cfg, x)?;
    let n = cfg.width as f64;
    let points = x.rows();
    let hidden = cfg.hidden_layers();
    let mut k = DenseMatrix::zeros(points, points);
    for layer in 0..=hidden {
        let s2 = cfg.layer_scale(layer).powi(2);
        let (phi, fan_in) = if layer == 0 { (input_kernel(x)?, cfg.input_dim as f64) } else { (feature_kernel(&trace, layer)?, n) };
        let grad = if layer < hidden { Some(gradient_kernel(p, cfg, x, layer + 1)?) } else { None };
        for i in 0..points {
            for j in 0..points {
                let g = grad.as_ref().map_or(1.0, |g| g.matrix[(i, j)] / n);
                k[(i, j)] += s2 * fan_in * phi.matrix[(i, j)] * g;
            }
        }
    }
    Ok(k)
}

fn criterion_2() -> Verdict {
    let mut worst: f64 = 0.0;
    let task = TaskSpec::regression(5, 2, 11);
    let teacher = task.teacher()?;
    let probes = probe_set(&task, &teacher, 3, 12)?;
    for param in [Parameterization::Mup, Parameterization::Sp] {
        let cfg = net(param, 32, 5, 1, 9);
        let mut p = init_params::<f64>(&cfg);
        let lr = effective_lr(&cfg, &ExperimentConfig::preset(Preset::RichConsistency).schedule) / 3.0;
        for trained in [false, true] {
            if trained {
                for _ in 0..25 {
                    let (_, g) = loss_and_grads(&p, &cfg, &probes.x, &probes.y)?;
                    p = sgd_step(&p, &g, lr)?;
                }
            }
            let want = entk(&p, &cfg, &probes.x)?.matrix;
            let got = ntk_from_layers(&p, &cfg, &probes.x)?;
            let err = got.as_slice().iter().zip(want.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(err / want.max_abs());
        }
    }
    Ok((worst < 1e-10, format!("max relative deviation {worst:.1e} over μP/SP, init and after 25 steps")))
}

fn criterion_3(root: &Path) -> Verdict {
    let mut cfg = ExperimentConfig::preset(Preset::LazySpectral);
    cfg.widths = vec![256, 512];
    cfg.seeds_per_width = 4;
    let dir = root.join("lazy");
    run_sweep(&cfg, &dir, 1)?;
    let analysis = kernel_analysis(&dir, 0, true)?;
    let mut members = Vec::new();
    let mut ensemble = Vec::new();
    for w in &analysis.widths {
        let errs: Vec<f64> = w.members.iter().map(|m| m.max_rel_error(1e-3)).collect();
        members.push(format!("N={} [{}]", w.width, errs.iter().map(|e| format!("{:.1}%", 100.0 * e)).collect::<Vec<_>>().join(" ")));
        ensemble.push((w.width, w.ensemble_rmse, errs));
    }
    let member_ok = ensemble.iter().all(|(_, _, e)| e.iter().all(|v| *v < 0.05));
    let ensemble_ok = ensemble.iter().all(|(_, r, _)| *r < 0.05);
    let rms: Vec<String> = ensemble.iter().map(|(w, r, _)| format!("N={w} {:.3}", r)).collect();
    Ok((
        member_ok && ensemble_ok,
        format!(
            "per-member max rel error {}: {}; ensemble vs ⟨K⟩ flow RMS {}: {}",
            if member_ok { "ok" } else { "above 5%" },
            members.join(", "),
            if ensemble_ok { "ok" } else { "above 5%" },
            rms.join(", ")
        ),
    ))
}

fn criterion_4() -> Verdict {
    let widths = [64, 128, 256, 512, 1024, 2048, 4096];
    let base = ExperimentConfig::preset(Preset::RichConsistency);
    let mut schedule = base.schedule.clone();
    schedule.eta0 = 5.0;
    let teacher = base.task.teacher()?;
    let batch = online_batch(&base.stream(), &teacher, 0)?;
    let probes = probe_set(&base.task, &teacher, 5, 32)?;
    let mut slopes = Vec::new();
    for param in [Parameterization::Mup, Parameterization::Sp] {
        let mut means = Vec::new();
        for &w in &widths {
            let mut total = 0.0;
            for seed in 0..8 {
                let cfg = net(param, w, base.net.input_dim, 1, 100 + seed);
                let p = init_params::<f64>(&cfg);
                total += feature_movement(&p, &cfg, &batch.x, &batch.y, &probes.x, effective_lr(&cfg, &schedule))?;
            }
            means.push(total / 8.0);
        }
        slopes.push(loglog_slope(&widths_f(&widths), &means));
    }
    let pass = (-0.1..=0.1).contains(&slopes[0]) && (-0.65..=-0.35).contains(&slopes[1]);
    Ok((pass, format!("slope μP {:+.3} (want ±0.1), SP {:+.3} (want −0.65..−0.35), N 64..4096, 8 seeds", slopes[0], slopes[1])))
}

fn seed_variance(samples: &[Vec<f64>]) -> f64 {
    let e = samples.len() as f64;
    let len = samples[0].len();
    (0..len)
        .map(|i| {
            let m = samples.iter().map(|s| s[i]).sum::<f64>() / e;
            samples.iter().map(|s| (s[i] - m).powi(2)).sum::<f64>() / (e - 1.0)
        })
        .sum::<f64>()
        / len as f64
}

fn criterion_5(shared: &mut Shared) -> Verdict {
    let widths = [64, 128, 256, 512, 1024];
    let base = ExperimentConfig::preset(Preset::RichConsistency);
    let teacher = base.task.teacher()?;
    let probes = probe_set(&base.task, &teacher, 5, 16)?;
    let (mut kvar, mut fvar) = (Vec::new(), Vec::new());
    for &w in &widths {
        let (mut ks, mut fs) = (Vec::new(), Vec::new());
        for seed in 0..16 {
            let cfg = base.cell_net(w, seed);
            let p = init_params::<f64>(&cfg);
            let ratio = effective_lr(&cfg, &base.schedule) / base.schedule.eta0;
            ks.push(entk(&p, &cfg, &probes.x)?.to_flow(ratio)?.matrix.into_vec());
            fs.push(forward(&p, &cfg, &probes.x)?.outputs.into_vec());
        }
        kvar.push(seed_variance(&ks));
        fvar.push(seed_variance(&fs));
    }
    let k_slope = loglog_slope(&widths_f(&widths), &kvar);
    let f_slope = loglog_slope(&widths_f(&widths), &fvar);
    // Logit variance over seeds after rich training, from the bias/variance split.
    let (_, out) = shared.sweep(Preset::RichConsistency)?;
    let widest = RICH_WIDTHS[RICH_WIDTHS.len() - 1];
    let rows: Vec<_> = bias_variance(&out.table, widest)?.into_iter().filter(|r| r.step == RICH_STEPS).collect();
    let trained_slope =
        loglog_slope(&rows.iter().map(|r| r.width as f64).collect::<Vec<_>>(), &rows.iter().map(|r| r.variance).collect::<Vec<_>>());
    let ok = |s: f64| (-1.25..=-0.75).contains(&s);
    Ok((
        ok(k_slope) && ok(f_slope) && ok(trained_slope),
        format!(
            "slopes: eNTK entries at init {k_slope:+.3}, logits at init {f_slope:+.3}, logits after {RICH_STEPS} rich steps {trained_slope:+.3} (want −1.25..−0.75)"
        ),
    ))
}

fn criterion_6(shared: &mut Shared) -> Verdict {
    let s = shared.mup_summaries()?;
    let losses: Vec<f64> = s.iter().map(|r| r.ensemble_loss).collect();
    let loss_ok = losses.windows(2).all(|w| w[1] <= w[0]);
    let rmse: Vec<f64> = s.iter().map(|r| r.ensemble_relative_rmse).collect();
    let inversions: Vec<f64> = rmse.windows(2).filter(|w| w[1] > w[0]).map(|w| w[1] - w[0]).collect();
    let rmse_ok = inversions.len() <= 1 && inversions.iter().all(|d| *d < 0.02);
    let narrow = s[0].ensemble_loss;
    let wide_single = s.last().unwrap().mean_single_loss;
    let ensemble_ok = narrow > wide_single;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ");
    Ok((
        loss_ok && rmse_ok && ensemble_ok,
        format!(
            "ensemble loss non-increasing {} [{}]; logit rmse to widest {} [{}]; narrowest ensemble {narrow:.2e} vs widest single {wide_single:.2e} {}",
            if loss_ok { "yes" } else { "no" },
            fmt(&losses),
            if rmse_ok { "ok" } else { "no" },
            fmt(&rmse),
            if ensemble_ok { "ok" } else { "no" }
        ),
    ))
}

/// Sup gaps of the three widths below the widest; infinite where a cell diverged.
fn top_gaps(summaries: &[WidthSummary]) -> Vec<f64> {
    let n = summaries.len();
    summaries[n - 4..n - 1].iter().map(|s| s.sup_loss_gap).collect()
}

fn criterion_7(shared: &mut Shared) -> Verdict {
    let mup = top_gaps(&shared.mup_summaries()?);
    let (_, sp_out) = shared.sweep(Preset::SpContrast)?;
    let sp_diverged = sp_out.diverged();
    let sp = top_gaps(&width_summaries(&sp_out.table, &sp_out.records, RICH_STEPS, None)?);
    let mup_ok = mup.iter().all(|g| g.is_finite()) && strictly_decreasing(&mup);
    let sp_breaks = sp_diverged > 0 || !strictly_decreasing(&sp);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    let widths = &RICH_WIDTHS[RICH_WIDTHS.len() - 4..RICH_WIDTHS.len() - 1];
    Ok((
        mup_ok && sp_breaks,
        format!(
            "sup gap to N={} at N={widths:?}: μP [{}] {}; SP [{}] {}, {sp_diverged} diverged cells",
            RICH_WIDTHS[RICH_WIDTHS.len() - 1],
            fmt(&mup),
            if mup_ok { "strictly decreasing" } else { "not strictly decreasing" },
            fmt(&sp),
            if sp_breaks { "breaks the ordering" } else { "also ordered" }
        ),
    ))
}

/// Worst top-20 eigenvalue deviation from the widest, and the worst fraction of mid-decile `k`
/// with `C_narrow(k) ≤ C_wide(k) + 0.02` over all width pairs.
fn spectra_agreement(a: &KernelAnalysis) -> (f64, f64) {
    let wide = &a.widths.last().unwrap().report;
    let mut eig_dev: f64 = 0.0;
    for w in &a.widths {
        for k in 0..20 {
            eig_dev = eig_dev.max((w.report.eigenvalues[k] - wide.eigenvalues[k]).abs() / wide.eigenvalues[k]);
        }
    }
    let mut frac: f64 = 1.0;
    for (i, narrow) in a.widths.iter().enumerate() {
        for wider in &a.widths[i + 1..] {
            let n = narrow.report.eigenvalues.len();
            let ks: Vec<usize> = (n.div_ceil(10)..=9 * n / 10).collect();
            let ok = ks.iter().filter(|&&k| narrow.report.c(k) <= wider.report.c(k) + 0.02).count();
            frac = frac.min(ok as f64 / ks.len() as f64);
        }
    }
    (eig_dev, frac)
}

fn criterion_8(root: &Path) -> Verdict {
    let widths = vec![128, 512, 2048];
    let mut init = ExperimentConfig::preset(Preset::LazySpectral);
    init.widths = widths.clone();
    init.seeds_per_width = 4;
    init.schedule.steps = 0;
    let dir = root.join("init_spectra");
    run_sweep(&init, &dir, 1)?;
    let (eig0, c0) = spectra_agreement(&kernel_analysis(&dir, 0, false)?);

    let mut after = ExperimentConfig::preset(Preset::AfterKernel);
    after.widths = widths;
    after.seeds_per_width = 2;
    after.schedule.steps = 400;
    after.record_every = 50;
    let dir = root.join("after_spectra");
    run_sweep(&after, &dir, 1)?;
    let (eig1, c1) = spectra_agreement(&kernel_analysis(&dir, 400, false)?);
    let pass = eig0 < 0.2 && eig1 < 0.2 && c0 >= 0.8 && c1 >= 0.8;
    Ok((
        pass,
        format!(
            "N=128/512/2048: init top-20 max dev {:.1}%, C(k) ordering {:.0}% of mid-decile k; after-kernel {:.1}%, {:.0}%",
            100.0 * eig0,
            100.0 * c0,
            100.0 * eig1,
            100.0 * c1
        ),
    ))
}

fn criterion_9(shared: &mut Shared) -> Verdict {
    let (_, out) = shared.sweep(Preset::RichConsistency)?;
    let (mut skew, mut kurt, mut pooled_widths): (f64, f64, Vec<usize>) = (0.0, 0.0, Vec::new());
    for snap in pooled_preacts(&out.records, 0).iter().filter(|s| s.width * RICH_SEEDS >= 4096) {
        let s = preact_stats(snap)?;
        skew = skew.max(s.skew.abs());
        kurt = kurt.max(s.kurtosis.abs());
        if !pooled_widths.contains(&snap.width) {
            pooled_widths.push(snap.width);
        }
    }
    let summaries = shared.mup_summaries()?;
    let cka: Vec<f64> = summaries[..summaries.len() - 1].iter().map(|s| s.mean_cka.unwrap_or(f64::NAN)).collect();
    let cka_ok = cka.windows(2).all(|w| w[1] > w[0]);
    let gauss_ok = !pooled_widths.is_empty() && skew < 0.2 && kurt < 0.5;
    Ok((
        gauss_ok && cka_ok,
        format!(
            "init preacts at N={pooled_widths:?} (E={RICH_SEEDS}): max |skew| {skew:.3}, max |kurt| {kurt:.3}; CKA to widest [{}] {}",
            cka.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>().join(" "),
            if cka_ok { "increasing" } else { "not increasing" }
        ),
    ))
}

/// Mean over seeds of `(train_loss, probe_loss)` per recorded step, by width.
fn mean_curves(out: &SweepOutput) -> BTreeMap<usize, Vec<(f64, f64)>> {
    let mut curves: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for r in &out.records {
        let c = curves.entry(r.width).or_insert_with(|| vec![(0.0, 0.0); r.steps.len()]);
        for (slot, s) in c.iter_mut().zip(&r.steps) {
            slot.0 += s.train_loss;
            slot.1 += s.probe_loss;
        }
        *counts.entry(r.width).or_default() += 1.0;
    }
    for (w, c) in curves.iter_mut() {
        for slot in c.iter_mut() {
            slot.0 /= counts[w];
            slot.1 /= counts[w];
        }
    }
    curves
}

fn criterion_10(root: &Path) -> Verdict {
    let mut cfg = ExperimentConfig::preset(Preset::OfflineNoise);
    cfg.widths = vec![64, 256, 1024];
    cfg.seeds_per_width = 2;
    cfg.probe_count = 256;
    // 400 epochs of 128 samples in batches of 32.
    cfg.stream.mode = StreamMode::Offline { dataset_size: 128, noise_frac: 0.5, shuffle_seed: 17 };
    cfg.schedule.steps = 1600;
    cfg.record_every = 4;
    let offline = run_sweep(&cfg, &root.join("offline"), 1)?;
    let mut online_cfg = cfg.clone();
    online_cfg.stream.mode = StreamMode::Online;
    let online = run_sweep(&online_cfg, &root.join("online"), 1)?;
    if offline.diverged() + online.diverged() > 0 {
        return Ok((false, format!("{} offline and {} online cells diverged", offline.diverged(), online.diverged())));
    }
    let off = mean_curves(&offline);
    let on = mean_curves(&online);
    let final_train: Vec<f64> = off.values().map(|c| c.last().unwrap().0).collect();
    let train_ok = final_train.iter().all(|l| *l < 1e-2);
    // Overfitting: the final probe loss sits well above its running minimum.
    let rebound: Vec<f64> = off
        .values()
        .map(|c| {
            let min = c.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
            c.last().unwrap().1 / min
        })
        .collect();
    let rebound_ok = rebound.iter().all(|r| *r > 1.1);
    let gap = |m: &BTreeMap<usize, Vec<(f64, f64)>>| {
        let first = m.values().next().unwrap().last().unwrap().1;
        let last = m.values().last().unwrap().last().unwrap().1;
        (first - last).abs()
    };
    let (g_off, g_on) = (gap(&off), gap(&on));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    Ok((
        train_ok && rebound_ok && g_off > g_on,
        format!(
            "final train loss [{}]; final/min probe loss [{}]; N=64 vs 1024 probe gap offline {g_off:.4} vs online {g_on:.4}",
            fmt(&final_train),
            fmt(&rebound)
        ),
    ))
}

fn csv_files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_11(root: &Path) -> Verdict {
    let presets = [
        Preset::LazySpectral,
        Preset::RichConsistency,
        Preset::SpContrast,
        Preset::AlphaSweep,
        Preset::BiasVariance,
        Preset::OfflineNoise,
        Preset::AfterKernel,
    ];
    let mut files = 0;
    for preset in presets {
        let mut cfg = ExperimentConfig::preset(preset);
        cfg.widths = if preset == Preset::AlphaSweep { vec![16] } else { vec![8, 16] };
        cfg.seeds_per_width = 2;
        cfg.schedule.steps = 24;
        cfg.record_every = 6;
        cfg.probe_count = 16;
        if cfg.full_batch {
            cfg.schedule.batch_size = 16;
        }
        if let StreamMode::Offline { noise_frac, shuffle_seed, .. } = cfg.stream.mode {
            cfg.stream.mode = StreamMode::Offline { dataset_size: 48, noise_frac, shuffle_seed };
        }
        let (a, b) = (root.join(format!("{preset:?}_a")), root.join(format!("{preset:?}_b")));
        run_preset(&cfg, &a, 1)?;
        run_preset(&cfg, &b, 2)?;
        let (fa, fb) = (csv_files(&a), csv_files(&b));
        if fa != fb || fa.is_empty() {
            return Ok((false, format!("{preset:?} rerun produced different CSVs")));
        }
        files += fa.len();
    }
    Ok((true, format!("7 presets rerun with 1 and 2 workers: {files} CSV files byte-identical")))
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let root = tempfile::tempdir().expect("temp dir");
    let mut shared = Shared { root: tempfile::tempdir().expect("temp dir"), mup: None, sp: None };
    let mut errors = 0;
    let mut passed = 0;
    let mut ran = 0;
    for n in 1..=11 {
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let verdict = match n {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(root.path()),
            4 => criterion_4(),
            5 => criterion_5(&mut shared),
            6 => criterion_6(&mut shared),
            7 => criterion_7(&mut shared),
            8 => criterion_8(root.path()),
            9 => criterion_9(&mut shared),
            10 => criterion_10(root.path()),
            _ => criterion_11(root.path()),
        };
        let secs = start.elapsed().as_secs_f64();
        ran += 1;
        match verdict {
            Ok((pass, detail)) => {
                passed += pass as usize;
                println!("criterion {n}: {} ({detail}; {secs:.0}s)", if pass { "PASS" } else { "FAIL" });
            }
            Err(e) => {
                errors += 1;
                println!("criterion {n}: FAIL (error: {e}; {secs:.0}s)");
            }
        }
    }
    println!("acceptance: {passed}/{ran} criteria pass");
    if errors > 0 {
        std::process::exit(1);
    }
}
