//! Training cells and running sweeps over them.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SHARPNESS_BATCH};
use crate::error::{Error, Result};
use crate::metrics::{sharpness, EnsembleTable, MemberStep, PreactSnapshot};
use crate::net::checkpoint::{read_json, write_json};
use crate::net::{
    effective_lr, forward, init_params, load_checkpoint, loss_and_grads_offset, mse, save_checkpoint, sgd_step, NetConfig, ParamSet,
};
use crate::numerics::{DenseMatrix, RngState};
use crate::tasks::{online_batch, probe_set, Batch, DataStream, OfflineData, StreamMode, Teacher};

/// Loss above which a run counts as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e6;

const RECORD_FILE: &str = "record.json";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub train_loss: f64,
    pub probe_loss: f64,
    /// Probe outputs, point-major over channels; `f − f₀` when training is centered.
    pub logits: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sharpness: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreactRecord {
    pub step: u64,
    pub snapshot: PreactSnapshot,
}

/// First step whose loss left the finite range; `loss` is `None` for NaN or infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub step: u64,
    pub loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_digest: String,
    pub width: usize,
    pub seed: u64,
    pub net_seed: u64,
    pub steps: Vec<StepRecord>,
    pub preacts: Vec<PreactRecord>,
    pub divergence: Option<Divergence>,
    /// Steps with a checkpoint in the cell directory.
    pub checkpoints: Vec<u64>,
}

impl RunRecord {
    pub fn last(&self) -> Option<&StepRecord> {
        self.steps.last()
    }

    pub fn step(&self, step: u64) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.step == step)
    }

    /// `Err(DivergedLoss)` for a diverged cell.
    pub fn check(&self) -> Result<()> {
        match self.divergence {
            Some(d) => Err(Error::DivergedLoss { step: d.step, loss: d.loss.unwrap_or(f64::NAN) }),
            None => Ok(()),
        }
    }
}

/// A finished cell with the parameter snapshots it asked to keep.
pub struct CellOutput {
    pub record: RunRecord,
    pub checkpoints: Vec<(u64, ParamSet<f64>)>,
}

enum Source {
    Online(DataStream),
    Offline(OfflineData),
    Fixed(Batch),
}

impl Source {
    fn batch(&self, teacher: &Teacher, t: u64) -> Result<Batch> {
        match self {
            Source::Online(s) => online_batch(s, teacher, t),
            Source::Offline(d) => Ok(d.batch(t)),
            Source::Fixed(b) => Ok(b.clone()),
        }
    }
}

/// Shared inputs of every cell in a sweep.
pub struct CellContext {
    pub teacher: Teacher,
    pub probes: Batch,
    sharpness_batch: Option<Batch>,
    source: Source,
}

impl CellContext {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let teacher = config.task.teacher()?;
        let probes = probe_set(&config.task, &teacher, config.probe_seed, config.probe_count)?;
        let sharpness_batch = if config.sharpness_every > 0 {
            let seed = RngState::new(config.probe_seed).substream("sharpness").next_u64();
            Some(probe_set(&config.task, &teacher, seed, SHARPNESS_BATCH)?)
        } else {
            None
        };
        let source = if config.full_batch {
            Source::Fixed(probes.clone())
        } else {
            match config.stream.mode {
                StreamMode::Online => Source::Online(config.stream()),
                StreamMode::Offline { .. } => Source::Offline(config.stream().materialize(&teacher)?),
            }
        };
        Ok(CellContext { teacher, probes, sharpness_batch, source })
    }

    /// Flattened probe targets, point-major.
    pub fn targets(&self) -> Vec<f64> {
        self.probes.y.as_slice().to_vec()
    }

    pub fn offline(&self) -> Option<&OfflineData> {
        match &self.source {
            Source::Offline(d) => Some(d),
            _ => None,
        }
    }
}

fn diverged(loss: f64) -> bool {
    !loss.is_finite() || loss > DIVERGENCE_LOSS
}

fn preact_snapshots(
    params: &ParamSet<f64>,
    net: &NetConfig,
    probes: &DenseMatrix<f64>,
    count: usize,
    step: u64,
) -> Result<Vec<PreactRecord>> {
    let count = count.min(probes.rows());
    if count == 0 {
        return Ok(Vec::new());
    }
    let x = DenseMatrix::from_fn(count, probes.cols(), |i, j| probes[(i, j)]);
    let trace = forward(params, net, &x)?;
    let mut out = Vec::new();
    for layer in 1..=net.hidden_layers() {
        let h = trace.preact(layer)?;
        for probe_id in 0..count {
            out.push(PreactRecord {
                step,
                snapshot: PreactSnapshot { width: net.width, layer, probe_id, values: h.row(probe_id).to_vec() },
            });
        }
    }
    Ok(out)
}

/// Trains one `(width, seed)` cell and keeps the parameters at every checkpoint step.
pub fn train_cell(config: &ExperimentConfig, ctx: &CellContext, width: usize, seed: u64) -> Result<CellOutput> {
    let net = config.cell_net(width, seed);
    net.validate()?;
    let lr = effective_lr(&net, &config.schedule);
    let total = config.schedule.steps;
    let mut params: ParamSet<f64> = init_params(&net);
    let init = config.center_output.then(|| params.clone());
    let offset_on = |x: &DenseMatrix<f64>| -> Result<Option<DenseMatrix<f64>>> {
        match &init {
            Some(p0) => Ok(Some(forward(p0, &net, x)?.outputs)),
            None => Ok(None),
        }
    };
    let probe_offset = offset_on(&ctx.probes.x)?;
    let fixed_offset = match &ctx.source {
        Source::Fixed(b) => offset_on(&b.x)?,
        _ => None,
    };
    let full_offset = match &ctx.source {
        Source::Offline(d) => offset_on(&d.x)?,
        _ => None,
    };
    let predict = |p: &ParamSet<f64>, x: &DenseMatrix<f64>, off: &Option<DenseMatrix<f64>>| -> Result<DenseMatrix<f64>> {
        let mut f = forward(p, &net, x)?.outputs;
        if let Some(o) = off {
            f.add_scaled(o, -1.0)?;
        }
        Ok(f)
    };

    let mut record = RunRecord {
        config_digest: config.digest(),
        width,
        seed,
        net_seed: net.seed,
        steps: Vec::new(),
        preacts: preact_snapshots(&params, &net, &ctx.probes.x, config.preact_probes, 0)?,
        divergence: None,
        checkpoints: Vec::new(),
    };
    let mut checkpoints = Vec::new();

    for step in 0..=total {
        let batch = ctx.source.batch(&ctx.teacher, step)?;
        let offset = match &ctx.source {
            Source::Fixed(_) => fixed_offset.clone(),
            _ => offset_on(&batch.x)?,
        };
        let (loss, grads) = loss_and_grads_offset(&params, &net, &batch.x, &batch.y, offset.as_ref())?;
        if diverged(loss) || !params.all_finite() {
            record.divergence = Some(Divergence { step, loss: loss.is_finite().then_some(loss) });
            break;
        }
        if config.is_recorded(step) {
            let f = predict(&params, &ctx.probes.x, &probe_offset)?;
            let probe_loss = mse(&f, &ctx.probes.y);
            let train_loss = match ctx.offline() {
                Some(d) => mse(&predict(&params, &d.x, &full_offset)?, &d.y),
                None => loss,
            };
            let sharp = match (&ctx.sharpness_batch, config.sharpness_every) {
                (Some(b), every) if step % every == 0 => Some(sharpness(&params, &net, &b.x, &b.y)?),
                _ => None,
            };
            if diverged(probe_loss) || diverged(train_loss) {
                let bad = if diverged(probe_loss) { probe_loss } else { train_loss };
                record.divergence = Some(Divergence { step, loss: bad.is_finite().then_some(bad) });
                break;
            }
            record.steps.push(StepRecord { step, train_loss, probe_loss, logits: f.into_vec(), sharpness: sharp });
        }
        let keep = step == total || (config.checkpoint_every > 0 && step % config.checkpoint_every == 0);
        if keep {
            checkpoints.push((step, params.clone()));
            record.checkpoints.push(step);
        }
        if step == total {
            record.preacts.extend(preact_snapshots(&params, &net, &ctx.probes.x, config.preact_probes, step)?);
        } else {
            params = sgd_step(&params, &grads, lr)?;
        }
    }
    Ok(CellOutput { record, checkpoints })
}

/// Trains one cell; deterministic in `(config, width, seed)`.
pub fn run_cell(config: &ExperimentConfig, width: usize, seed: u64) -> Result<RunRecord> {
    let ctx = CellContext::new(config)?;
    Ok(train_cell(config, &ctx, width, seed)?.record)
}

pub fn cell_dir(root: &Path, width: usize, seed: u64) -> PathBuf {
    root.join("cells").join(format!("w{width:05}_s{seed:03}"))
}

pub fn checkpoint_dir(cell: &Path, step: u64) -> PathBuf {
    cell.join(format!("ckpt_{step:08}"))
}

fn staging(dir: &Path) -> PathBuf {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    dir.with_file_name(format!(".{name}.partial"))
}

/// Writes a cell directory whole: everything lands in a hidden sibling that is renamed last.
fn write_cell(dir: &Path, config: &ExperimentConfig, out: &CellOutput) -> Result<()> {
    let tmp = staging(dir);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let net = config.cell_net(out.record.width, out.record.seed);
    for (step, params) in &out.checkpoints {
        save_checkpoint(&checkpoint_dir(&tmp, *step), &net, *step, params)?;
    }
    write_json(&tmp.join(RECORD_FILE), &out.record)?;
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))
}

pub fn load_record(cell: &Path) -> Result<RunRecord> {
    read_json(&cell.join(RECORD_FILE))
}

/// Parameters of a cell at `step`: regenerated for step 0, loaded from a checkpoint otherwise.
pub fn load_cell_params(run_dir: &Path, config: &ExperimentConfig, width: usize, seed: u64, step: u64) -> Result<ParamSet<f64>> {
    if step == 0 {
        return Ok(init_params(&config.cell_net(width, seed)));
    }
    let dir = checkpoint_dir(&cell_dir(run_dir, width, seed), step);
    if !dir.exists() {
        return Err(Error::MissingCheckpoint(dir));
    }
    Ok(load_checkpoint(&dir)?.1)
}

/// Provenance written next to the cells of every sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub code_version: String,
    pub probe_seed: u64,
}

pub fn load_manifest(run_dir: &Path) -> Result<RunManifest> {
    let manifest: RunManifest = read_json(&run_dir.join(MANIFEST_FILE))?;
    if manifest.config.digest() != manifest.config_digest {
        return Err(Error::MalformedArtifact { path: run_dir.join(MANIFEST_FILE), reason: "config digest mismatch".into() });
    }
    Ok(manifest)
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub table: EnsembleTable,
    /// Records ordered by `(width, seed)`.
    pub records: Vec<RunRecord>,
}

impl SweepOutput {
    pub fn diverged(&self) -> usize {
        self.records.iter().filter(|r| r.divergence.is_some()).count()
    }

    /// `Err(PartialSweep)` when any cell diverged.
    pub fn check(&self) -> Result<()> {
        match self.diverged() {
            0 => Ok(()),
            n => Err(Error::PartialSweep { diverged: n, total: self.records.len() }),
        }
    }
}

/// Folds records into a table in `(width, seed, step)` order.
pub fn ensemble_table(targets: Vec<f64>, records: &[RunRecord]) -> EnsembleTable {
    let mut table = EnsembleTable::new(targets);
    for r in records {
        for s in &r.steps {
            let entry = MemberStep { train_loss: s.train_loss, probe_loss: s.probe_loss, logits: s.logits.clone() };
            table.insert(r.width, r.seed, s.step, entry);
        }
    }
    table
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))
}

/// Runs every cell in memory on `workers` threads.
pub fn run_cells(config: &ExperimentConfig, workers: usize) -> Result<SweepOutput> {
    let ctx = CellContext::new(config)?;
    let cells = config.cells();
    let records = pool(workers)?
        .install(|| cells.par_iter().map(|&(w, s)| train_cell(config, &ctx, w, s).map(|o| o.record)).collect::<Result<Vec<_>>>())?;
    Ok(SweepOutput { table: ensemble_table(ctx.targets(), &records), records })
}

/// Runs every cell on `workers` threads, persisting each finished cell under `out`.
///
/// Cells whose record already carries the current config digest are loaded instead
/// of retrained. Diverged cells are kept; see [`SweepOutput::check`].
pub fn run_sweep(config: &ExperimentConfig, out: &Path, workers: usize) -> Result<SweepOutput> {
    let ctx = CellContext::new(config)?;
    fs::create_dir_all(out.join("cells")).map_err(|e| Error::io(out, e))?;
    let manifest = RunManifest {
        config: ExperimentConfig { out_dir: None, ..config.clone() },
        config_digest: config.digest(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        probe_seed: config.probe_seed,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    let digest = config.digest();
    let cells = config.cells();
    let records = pool(workers)?.install(|| {
        cells
            .par_iter()
            .map(|&(w, s)| {
                let dir = cell_dir(out, w, s);
                if let Ok(r) = load_record(&dir) {
                    if r.config_digest == digest && r.width == w && r.seed == s {
                        return Ok(r);
                    }
                }
                let cell = train_cell(config, &ctx, w, s)?;
                write_cell(&dir, config, &cell)?;
                Ok(cell.record)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepOutput { table: ensemble_table(ctx.targets(), &records), records })
}

/// Records of a finished sweep directory, ordered by `(width, seed)`.
pub fn load_sweep(run_dir: &Path) -> Result<(RunManifest, Vec<RunRecord>)> {
    let manifest = load_manifest(run_dir)?;
    let mut records = Vec::new();
    for (w, s) in manifest.config.cells() {
        let dir = cell_dir(run_dir, w, s);
        let r = load_record(&dir).map_err(|e| match e {
            Error::MissingCheckpoint(p) => Error::MalformedArtifact { path: p, reason: "cell record missing".into() },
            other => other,
        })?;
        if r.config_digest != manifest.config_digest {
            return Err(Error::MalformedArtifact { path: dir, reason: "cell belongs to a different config".into() });
        }
        records.push(r);
    }
    Ok((manifest, records))
}
