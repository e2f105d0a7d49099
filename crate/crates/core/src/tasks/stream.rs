//! Deterministic online and offline batch streams.
//!
//! A batch depends only on the stream description and the step index, never on
//! which network consumes it, so every width sees the same data in the same order.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sphere::sample_sphere;
use super::task::{TaskSpec, Teacher};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, RngState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StreamMode {
    #[serde(rename = "ONLINE")]
    Online,
    #[serde(rename = "OFFLINE")]
    Offline { dataset_size: usize, noise_frac: f64, shuffle_seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataStream {
    pub task: TaskSpec,
    pub data_seed: u64,
    pub batch_size: usize,
    pub mode: StreamMode,
}

/// A batch of inputs (`B x D`) with targets (`B x C`).
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub x: DenseMatrix<f64>,
    pub y: DenseMatrix<f64>,
}

/// Fresh online batch for step `t`: Gaussian positions `[tBD, (t+1)BD)` of the
/// stream's `online` substream, projected to the sphere.
pub fn online_batch(stream: &DataStream, teacher: &Teacher, t: u64) -> Result<Batch> {
    if stream.mode != StreamMode::Online {
        return Err(Error::WrongMode { expected: "ONLINE" });
    }
    let d = stream.task.input_dim;
    let b = stream.batch_size;
    let mut rng = RngState::new(stream.data_seed).substream("online").at(t * (b * d) as u64);
    let x = sample_sphere(&mut rng, d, b);
    let y = teacher.eval(&x)?;
    Ok(Batch { x, y })
}

/// Finite dataset with a deterministic set of corrupted labels.
#[derive(Clone, Debug, PartialEq)]
pub struct OfflineData {
    pub stream: DataStream,
    pub x: DenseMatrix<f64>,
    pub y_clean: DenseMatrix<f64>,
    pub y: DenseMatrix<f64>,
    pub noisy: Vec<bool>,
}

/// Builds an OFFLINE stream description for `task`.
pub fn make_offline(
    task: &TaskSpec,
    dataset_size: usize,
    noise_frac: f64,
    data_seed: u64,
    shuffle_seed: u64,
    batch_size: usize,
) -> Result<DataStream> {
    if dataset_size == 0 {
        return Err(Error::InvalidConfig("offline dataset needs at least one sample".into()));
    }
    if !(0.0..=1.0).contains(&noise_frac) {
        return Err(Error::InvalidConfig(format!("noise_frac must lie in [0, 1], got {noise_frac}")));
    }
    Ok(DataStream { task: task.clone(), data_seed, batch_size, mode: StreamMode::Offline { dataset_size, noise_frac, shuffle_seed } })
}

impl DataStream {
    /// Samples the fixed dataset of an OFFLINE stream.
    ///
    /// `round(noise_frac · P)` samples, chosen by a seeded permutation, get their label
    /// replaced: a uniformly random class for classification, an independent standard
    /// normal value for regression.
    pub fn materialize(&self, teacher: &Teacher) -> Result<OfflineData> {
        let StreamMode::Offline { dataset_size, noise_frac, .. } = self.mode else {
            return Err(Error::WrongMode { expected: "OFFLINE" });
        };
        let root = RngState::new(self.data_seed);
        let x = sample_sphere(&mut root.substream("offline-inputs"), self.task.input_dim, dataset_size);
        let y_clean = teacher.eval(&x)?;
        let corrupted = (noise_frac * dataset_size as f64).round() as usize;
        let mut pick = root.substream("noise-select");
        let order = pick.permutation(dataset_size);
        let mut noisy = vec![false; dataset_size];
        for &i in &order[..corrupted.min(dataset_size)] {
            noisy[i] = true;
        }
        let mut y = y_clean.clone();
        let mut labels = root.substream("noise-labels");
        let c = y.cols();
        for (i, is_noisy) in noisy.iter().enumerate() {
            if !is_noisy {
                continue;
            }
            if self.task.is_classification() {
                let k = labels.below(c as u64) as usize;
                for (j, v) in y.row_mut(i).iter_mut().enumerate() {
                    *v = if j == k { 1.0 } else { 0.0 };
                }
            } else {
                y[(i, 0)] = labels.next_gaussian();
            }
        }
        Ok(OfflineData { stream: self.clone(), x, y_clean, y, noisy })
    }
}

impl OfflineData {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    fn shuffle_seed(&self) -> u64 {
        match self.stream.mode {
            StreamMode::Offline { shuffle_seed, .. } => shuffle_seed,
            StreamMode::Online => unreachable!("offline data always has an offline stream"),
        }
    }

    /// Visiting order of epoch `epoch`.
    pub fn epoch_order(&self, epoch: u64) -> Vec<usize> {
        RngState::new(self.shuffle_seed()).substream_indexed("epoch", epoch).permutation(self.len())
    }

    /// Sample indices of batch `t`; batches may straddle an epoch boundary.
    pub fn batch_indices(&self, t: u64) -> Vec<usize> {
        let p = self.len() as u64;
        let b = self.stream.batch_size as u64;
        let mut out = Vec::with_capacity(b as usize);
        let mut cached: Option<(u64, Vec<usize>)> = None;
        for g in t * b..(t + 1) * b {
            let epoch = g / p;
            if cached.as_ref().map(|c| c.0) != Some(epoch) {
                cached = Some((epoch, self.epoch_order(epoch)));
            }
            out.push(cached.as_ref().expect("cached order").1[(g % p) as usize]);
        }
        out
    }

    pub fn batch(&self, t: u64) -> Batch {
        let idx = self.batch_indices(t);
        let d = self.x.cols();
        let c = self.y.cols();
        Batch {
            x: DenseMatrix::from_fn(idx.len(), d, |i, j| self.x[(idx[i], j)]),
            y: DenseMatrix::from_fn(idx.len(), c, |i, j| self.y[(idx[i], j)]),
        }
    }

    /// CSV with columns `sample_id, x_0..x_{D−1}, y_0..y_{C−1}, is_noisy`.
    pub fn to_csv(&self) -> String {
        let d = self.x.cols();
        let c = self.y.cols();
        let mut s = String::from("sample_id");
        (0..d).for_each(|j| write!(s, ",x_{j}").unwrap());
        (0..c).for_each(|j| write!(s, ",y_{j}").unwrap());
        s.push_str(",is_noisy\n");
        for i in 0..self.len() {
            write!(s, "{i}").unwrap();
            self.x.row(i).iter().for_each(|v| write!(s, ",{v}").unwrap());
            self.y.row(i).iter().for_each(|v| write!(s, ",{v}").unwrap());
            writeln!(s, ",{}", u8::from(self.noisy[i])).unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Shared probe set: `count` clean points from the task distribution.
pub fn probe_set(task: &TaskSpec, teacher: &Teacher, probe_seed: u64, count: usize) -> Result<Batch> {
    let x = sample_sphere(&mut RngState::new(probe_seed).substream("probes"), task.input_dim, count);
    let y = teacher.eval(&x)?;
    Ok(Batch { x, y })
}
