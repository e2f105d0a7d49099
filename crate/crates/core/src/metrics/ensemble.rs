//! Seed ensembles and the width bias/variance decomposition.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberStep {
    pub train_loss: f64,
    pub probe_loss: f64,
    /// Probe outputs, point-major over channels.
    pub logits: Vec<f64>,
}

/// Probe logits and losses for every `(width, seed, step)` plus the probe targets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTable {
    pub targets: Vec<f64>,
    pub entries: BTreeMap<(usize, u64, u64), MemberStep>,
}

/// Aggregate over the seeds recorded at one `(width, step)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStep {
    pub members: usize,
    pub ensemble_logits: Vec<f64>,
    pub ensemble_loss: f64,
    pub mean_single_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasVariance {
    pub step: u64,
    pub width: usize,
    pub mean_single_loss: f64,
    pub ensemble_loss: f64,
    pub variance: f64,
    pub bias: f64,
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64
}

impl EnsembleTable {
    pub fn new(targets: Vec<f64>) -> Self {
        EnsembleTable { targets, entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, width: usize, seed: u64, step: u64, entry: MemberStep) {
        self.entries.insert((width, seed, step), entry);
    }

    pub fn widths(&self) -> Vec<usize> {
        self.entries.keys().map(|k| k.0).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn seeds(&self, width: usize) -> Vec<u64> {
        self.entries.keys().filter(|k| k.0 == width).map(|k| k.1).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn steps(&self, width: usize) -> Vec<u64> {
        self.entries.keys().filter(|k| k.0 == width).map(|k| k.2).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn members(&self, width: usize, step: u64) -> Vec<&MemberStep> {
        self.entries.iter().filter(|(k, _)| k.0 == width && k.2 == step).map(|(_, v)| v).collect()
    }

    /// Arithmetic mean of member logits; `None` when no member reached `step`.
    pub fn aggregate(&self, width: usize, step: u64) -> Option<EnsembleStep> {
        let members = self.members(width, step);
        let first = members.first()?;
        let m = members.len() as f64;
        let mut ensemble_logits = vec![0.0; first.logits.len()];
        for member in &members {
            ensemble_logits.iter_mut().zip(&member.logits).for_each(|(e, l)| *e += l);
        }
        ensemble_logits.iter_mut().for_each(|e| *e /= m);
        let ensemble_loss = mse(&ensemble_logits, &self.targets);
        let mean_single_loss = members.iter().map(|s| mse(&s.logits, &self.targets)).sum::<f64>() / m;
        Some(EnsembleStep { members: members.len(), ensemble_logits, ensemble_loss, mean_single_loss })
    }
}

/// `variance = mean single − ensemble`, `bias = ensemble(N) − ensemble(reference)`.
///
/// Steps where fewer than two members survive, or the reference ensemble has no
/// entry, are skipped.
pub fn bias_variance(table: &EnsembleTable, reference_width: usize) -> Result<Vec<BiasVariance>> {
    for w in table.widths() {
        let seeds = table.seeds(w).len();
        if seeds < 2 {
            return Err(Error::InsufficientSeeds { width: w, got: seeds });
        }
    }
    if !table.widths().contains(&reference_width) {
        return Err(Error::InsufficientSeeds { width: reference_width, got: 0 });
    }
    let mut rows = Vec::new();
    for w in table.widths() {
        for step in table.steps(w) {
            let (Some(agg), Some(reference)) = (table.aggregate(w, step), table.aggregate(reference_width, step)) else {
                continue;
            };
            if agg.members < 2 {
                continue;
            }
            rows.push(BiasVariance {
                step,
                width: w,
                mean_single_loss: agg.mean_single_loss,
                ensemble_loss: agg.ensemble_loss,
                variance: agg.mean_single_loss - agg.ensemble_loss,
                bias: agg.ensemble_loss - reference.ensemble_loss,
            });
        }
    }
    rows.sort_by_key(|r| (r.step, r.width));
    Ok(rows)
}
