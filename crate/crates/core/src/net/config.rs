use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parameterization {
    #[serde(rename = "MUP")]
    Mup,
    #[serde(rename = "SP")]
    Sp,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    #[default]
    #[serde(rename = "RELU")]
    Relu,
}

/// Architecture and parameterization of a bias-free MLP.
///
/// `depth` counts weight matrices, so a depth-3 network has two hidden layers:
/// `W0: D→N`, `W1: N→N`, `W2: N→C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub depth: usize,
    /// Left at 0 in sweep templates, where each cell fills it in.
    #[serde(default)]
    pub width: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub alpha0: f64,
    pub parameterization: Parameterization,
    #[serde(default)]
    pub activation: Activation,
    pub seed: u64,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::InvalidConfig(format!("depth must be >= 2 (one hidden layer), got {}", self.depth)));
        }
        if self.width == 0 || self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidConfig("width, input_dim and output_dim must be positive".into()));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        Ok(())
    }

    /// Number of hidden layers `L`; preactivations are `h^1..h^L`.
    pub fn hidden_layers(&self) -> usize {
        self.depth - 1
    }

    /// `a` in `f = (a/√N) W^L φ(h^L)`: `α₀` for SP, `α₀/√N` for μP.
    pub fn output_multiplier(&self) -> f64 {
        match self.parameterization {
            Parameterization::Sp => self.alpha0,
            Parameterization::Mup => self.alpha0 / (self.width as f64).sqrt(),
        }
    }

    /// Full readout scale `a/√N`.
    pub fn readout_scale(&self) -> f64 {
        self.output_multiplier() / (self.width as f64).sqrt()
    }

    /// `(rows, cols)` of each weight matrix, stored as `out x in`.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(self.width, self.input_dim)];
        shapes.extend(std::iter::repeat_n((self.width, self.width), self.depth - 2));
        shapes.push((self.output_dim, self.width));
        shapes
    }

    pub fn num_params(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c).sum()
    }

    /// Forward multiplier applied after weight matrix `layer`.
    pub fn layer_scale(&self, layer: usize) -> f64 {
        if layer == 0 {
            1.0 / (self.input_dim as f64).sqrt()
        } else if layer + 1 == self.depth {
            self.readout_scale()
        } else {
            1.0 / (self.width as f64).sqrt()
        }
    }

    pub fn with_width(&self, width: usize) -> Self {
        NetConfig { width, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        NetConfig { seed, ..self.clone() }
    }
}

/// Base learning rate, batch size and step count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSchedule {
    pub eta0: f64,
    pub batch_size: usize,
    pub steps: u64,
    #[serde(default)]
    pub loss: LossKind,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    #[default]
    #[serde(rename = "MSE")]
    Mse,
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) || self.batch_size == 0 {
            return Err(Error::InvalidConfig("eta0 must be positive and batch_size >= 1".into()));
        }
        Ok(())
    }
}

/// Width- and laziness-corrected learning rate: μP `η₀ N/(1+α₀²)`, SP `η₀/(1+α₀²)`.
pub fn effective_lr(config: &NetConfig, schedule: &TrainSchedule) -> f64 {
    let lazy = 1.0 + config.alpha0 * config.alpha0;
    match config.parameterization {
        Parameterization::Mup => schedule.eta0 * config.width as f64 / lazy,
        Parameterization::Sp => schedule.eta0 / lazy,
    }
}
