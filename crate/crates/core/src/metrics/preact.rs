use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{wasserstein1, RngState};

pub const MIN_POOLED: usize = 100;
pub const GAUSS_REFERENCE_SAMPLES: usize = 100_000;
pub const GAUSS_REFERENCE_SEED: u64 = 0x5052_4541_4354;

/// Preactivation values of one layer at one probe point, pooled over neurons and ensemble members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreactSnapshot {
    pub width: usize,
    pub layer: usize,
    pub probe_id: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreactSummary {
    pub mean: f64,
    pub var: f64,
    pub skew: f64,
    /// Excess kurtosis (0 for a Gaussian).
    pub kurtosis: f64,
    /// W1 distance to the Gaussian with matching mean and variance.
    pub w1_gauss: f64,
}

pub fn preact_stats(snapshot: &PreactSnapshot) -> Result<PreactSummary> {
    let xs = &snapshot.values;
    if xs.len() < MIN_POOLED {
        return Err(Error::TooFewSamples { needed: MIN_POOLED, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let sd = m2.sqrt();
    let (skew, kurtosis) = if m2 > 0.0 { (m3 / (m2 * sd), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
    let reference: Vec<f64> =
        RngState::new(GAUSS_REFERENCE_SEED).gaussian_stream(GAUSS_REFERENCE_SAMPLES).into_iter().map(|z| mean + sd * z).collect();
    let w1_gauss = wasserstein1(xs, &reference)?;
    Ok(PreactSummary { mean, var: m2, skew, kurtosis, w1_gauss })
}

/// W1 distance between two snapshots (e.g. the same layer at two widths).
pub fn cross_width_w1(a: &PreactSnapshot, b: &PreactSnapshot) -> Result<f64> {
    wasserstein1(&a.values, &b.values)
}
