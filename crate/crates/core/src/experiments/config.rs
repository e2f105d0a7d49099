//! Sweep definitions and their presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::checkpoint::sha256_hex;
use crate::net::{LossKind, NetConfig, Parameterization, TrainSchedule};
use crate::numerics::RngState;
use crate::tasks::{DataStream, StreamMode, TaskSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Preset {
    LazySpectral,
    RichConsistency,
    SpContrast,
    AlphaSweep,
    BiasVariance,
    OfflineNoise,
    AfterKernel,
}

/// Data source of a sweep; the batch size comes from the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub data_seed: u64,
    pub mode: StreamMode,
}

/// One sweep over widths and seeds. Serialized field names are the config file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub net: NetConfig,
    pub widths: Vec<usize>,
    pub seeds_per_width: usize,
    pub schedule: TrainSchedule,
    pub task: TaskSpec,
    pub stream: StreamSpec,
    pub probe_count: usize,
    pub record_every: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_probe_seed")]
    pub probe_seed: u64,
    /// Train full-batch on the probe set instead of the stream.
    #[serde(default)]
    pub full_batch: bool,
    /// Train `f(x) − f₀(x)`, removing the function at initialization.
    #[serde(default)]
    pub center_output: bool,
    /// α₀ values for ALPHA_SWEEP.
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Probe points whose preactivations are snapshotted at init and at the final step.
    #[serde(default = "default_preact_probes")]
    pub preact_probes: usize,
    /// Sharpness stride in steps; 0 disables it.
    #[serde(default)]
    pub sharpness_every: u64,
    /// Checkpoint stride in steps; 0 keeps only the final checkpoint.
    #[serde(default)]
    pub checkpoint_every: u64,
}

fn default_probe_seed() -> u64 {
    0x7072_6F62_6573
}

fn default_preact_probes() -> usize {
    4
}

/// Held-out batch size for sharpness.
pub const SHARPNESS_BATCH: usize = 256;

pub const DEFAULT_WIDTHS: [usize; 8] = [32, 64, 128, 256, 512, 1024, 2048, 4096];

impl ExperimentConfig {
    /// Defaults of each preset before any desk-scale overrides.
    pub fn preset(preset: Preset) -> Self {
        let quadratic = |d| TaskSpec::regression(d, 2, 11);
        let mut cfg = ExperimentConfig {
            preset,
            net: NetConfig {
                depth: 3,
                width: 0,
                input_dim: 25,
                output_dim: 1,
                alpha0: 1.0,
                parameterization: Parameterization::Mup,
                activation: Default::default(),
                seed: 1,
            },
            widths: DEFAULT_WIDTHS.to_vec(),
            seeds_per_width: 8,
            schedule: TrainSchedule { eta0: 5.0, batch_size: 10, steps: 5000, loss: LossKind::Mse },
            task: quadratic(25),
            stream: StreamSpec { data_seed: 7, mode: StreamMode::Online },
            probe_count: 256,
            record_every: 10,
            out_dir: None,
            probe_seed: default_probe_seed(),
            full_batch: false,
            center_output: false,
            alphas: Vec::new(),
            preact_probes: default_preact_probes(),
            sharpness_every: 0,
            checkpoint_every: 0,
        };
        match preset {
            Preset::LazySpectral | Preset::AfterKernel => {
                cfg.net.input_dim = 5;
                cfg.task = quadratic(5);
                cfg.net.alpha0 = 1000.0;
                cfg.schedule.batch_size = cfg.probe_count;
                cfg.schedule.steps = 2000;
                cfg.full_batch = true;
                cfg.center_output = true;
                if preset == Preset::AfterKernel {
                    cfg.net.alpha0 = 1.0;
                    cfg.task = TaskSpec::classification(5, 4, 13);
                    cfg.net.output_dim = 4;
                    cfg.probe_count = 128;
                    cfg.schedule.batch_size = 128;
                    cfg.center_output = false;
                }
            }
            Preset::RichConsistency | Preset::BiasVariance => {
                // With B = 10, η₀ = 5 explodes near step 600 at most widths; 3 is the largest clean value.
                cfg.schedule.eta0 = 3.0;
            }
            Preset::SpContrast => {
                cfg.net.parameterization = Parameterization::Sp;
                cfg.schedule.eta0 = 50.0;
            }
            Preset::AlphaSweep => {
                cfg.net.input_dim = 5;
                cfg.task = quadratic(5);
                cfg.widths = vec![512];
                cfg.alphas = vec![0.5, 2.0, 500.0, 1000.0];
                cfg.schedule.batch_size = cfg.probe_count;
                cfg.schedule.steps = 1000;
                cfg.full_batch = true;
            }
            Preset::OfflineNoise => {
                cfg.net.input_dim = 5;
                cfg.net.output_dim = 10;
                cfg.task = TaskSpec::classification(5, 10, 13);
                cfg.schedule.batch_size = 32;
                // The MSE mean over 10 channels divides each channel's step by 10.
                cfg.schedule.eta0 = 30.0;
                // 200 epochs of 2048 samples.
                cfg.schedule.steps = 200 * 2048 / 32;
                cfg.record_every = 2048 / 32;
                cfg.stream.mode = StreamMode::Offline { dataset_size: 2048, noise_frac: 0.5, shuffle_seed: 17 };
            }
        }
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!("widths must be non-empty and strictly increasing, got {:?}", self.widths)));
        }
        if self.seeds_per_width == 0 || self.record_every == 0 || self.probe_count == 0 {
            return Err(Error::InvalidConfig("seeds_per_width, record_every and probe_count must be >= 1".into()));
        }
        self.task.validate()?;
        if self.task.input_dim != self.net.input_dim || self.task.output_dim() != self.net.output_dim {
            return Err(Error::InvalidConfig(format!(
                "net is {}→{} but the task is {}→{}",
                self.net.input_dim,
                self.net.output_dim,
                self.task.input_dim,
                self.task.output_dim()
            )));
        }
        self.net.with_width(self.widths[0]).validate()?;
        self.schedule.validate()?;
        if self.full_batch && self.schedule.batch_size != self.probe_count {
            return Err(Error::InvalidConfig("full_batch training needs batch_size == probe_count".into()));
        }
        if let StreamMode::Offline { dataset_size, noise_frac, .. } = self.stream.mode {
            if dataset_size == 0 || !(0.0..=1.0).contains(&noise_frac) {
                return Err(Error::InvalidConfig("offline streams need dataset_size >= 1 and noise_frac in [0, 1]".into()));
            }
            if self.full_batch {
                return Err(Error::InvalidConfig("full_batch cannot be combined with an OFFLINE stream".into()));
            }
        }
        if self.preset == Preset::AlphaSweep && self.alphas.is_empty() {
            return Err(Error::InvalidConfig("ALPHA_SWEEP needs a non-empty alphas list".into()));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidConfig("alphas must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring `out_dir`.
    pub fn digest(&self) -> String {
        let canonical = ExperimentConfig { out_dir: None, ..self.clone() };
        sha256_hex(serde_json::to_string(&canonical).expect("config serializes").as_bytes())
    }

    pub fn stream(&self) -> DataStream {
        DataStream {
            task: self.task.clone(),
            data_seed: self.stream.data_seed,
            batch_size: self.schedule.batch_size,
            mode: self.stream.mode.clone(),
        }
    }

    /// Initialization seed of ensemble member `seed`; the same at every width.
    pub fn net_seed(&self, seed: u64) -> u64 {
        RngState::new(self.net.seed).substream_indexed("member", seed).next_u64()
    }

    pub fn cell_net(&self, width: usize, seed: u64) -> NetConfig {
        self.net.with_width(width).with_seed(self.net_seed(seed))
    }

    /// `(width, seed)` of every cell, width-major.
    pub fn cells(&self) -> Vec<(usize, u64)> {
        self.widths.iter().flat_map(|&w| (0..self.seeds_per_width as u64).map(move |s| (w, s))).collect()
    }

    pub fn cell_digest(&self, width: usize, seed: u64) -> String {
        sha256_hex(format!("{}:{width}:{seed}", self.digest()).as_bytes())
    }

    /// Flow time per optimizer step: η₀ divided by the channel count of the MSE mean.
    pub fn time_per_step(&self) -> f64 {
        self.schedule.eta0 / self.net.output_dim as f64
    }

    pub fn is_recorded(&self, step: u64) -> bool {
        step.is_multiple_of(self.record_every) || step == self.schedule.steps
    }
}
