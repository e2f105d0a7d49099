use serde::{Deserialize, Serialize};

use super::config::NetConfig;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, RngState};
use crate::scalar::Scalar;

/// Weight matrices `W0..WL`, each stored `out x in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet<T> {
    pub layers: Vec<DenseMatrix<T>>,
}

/// Every weight is an independent standard normal from the seed's `weights` substreams.
pub fn init_params<T: Scalar>(config: &NetConfig) -> ParamSet<T> {
    let root = RngState::new(config.seed);
    let layers = config
        .layer_shapes()
        .into_iter()
        .enumerate()
        .map(|(l, (rows, cols))| {
            let mut rng = root.substream_indexed("weights", l as u64);
            let data = rng.gaussian_stream(rows * cols).into_iter().map(T::lit).collect();
            DenseMatrix::from_vec(rows, cols, data).expect("shape matches draw count")
        })
        .collect();
    ParamSet { layers }
}

impl<T: Scalar> ParamSet<T> {
    pub fn zeros_like(&self) -> Self {
        ParamSet { layers: self.layers.iter().map(|w| DenseMatrix::zeros(w.rows(), w.cols())).collect() }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|w| w.rows() * w.cols()).sum()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|w| (w.rows(), w.cols())).collect()
    }

    pub fn check_config(&self, config: &NetConfig) -> Result<()> {
        if self.shapes() != config.layer_shapes() {
            return Err(Error::ShapeMismatch(format!("parameters {:?} vs config {:?}", self.shapes(), config.layer_shapes())));
        }
        Ok(())
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shapes() != other.shapes() {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.shapes(), other.shapes())));
        }
        Ok(())
    }

    /// Parameters concatenated layer by layer, each row-major.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for w in &self.layers {
            out.extend_from_slice(w.as_slice());
        }
        out
    }

    /// Inverse of [`ParamSet::flatten`] using `self` as the shape template.
    pub fn unflatten(&self, flat: &[T]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch { context: "ParamSet::unflatten", expected: self.num_params(), got: flat.len() });
        }
        let mut offset = 0;
        let layers = self
            .layers
            .iter()
            .map(|w| {
                let len = w.rows() * w.cols();
                let m = DenseMatrix::from_vec(w.rows(), w.cols(), flat[offset..offset + len].to_vec());
                offset += len;
                m
            })
            .collect::<Result<_>>()?;
        Ok(ParamSet { layers })
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: T, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_scaled(b, s)?;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> T {
        self.layers.iter().zip(&other.layers).map(|(a, b)| crate::numerics::dot(a.as_slice(), b.as_slice())).sum()
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|w| w.all_finite())
    }

    pub fn max_abs(&self) -> T {
        self.layers.iter().fold(T::zero(), |m, w| m.max(w.max_abs()))
    }
}

/// Plain SGD: `θ' = θ − lr · grad`.
pub fn sgd_step<T: Scalar>(params: &ParamSet<T>, grads: &ParamSet<T>, lr: T) -> Result<ParamSet<T>> {
    let mut next = params.clone();
    next.axpy(-lr, grads)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, Parameterization};

    fn cfg(width: usize, seed: u64) -> NetConfig {
        NetConfig {
            depth: 3,
            width,
            input_dim: 5,
            output_dim: 1,
            alpha0: 1.0,
            parameterization: Parameterization::Mup,
            activation: Activation::Relu,
            seed,
        }
    }

    #[test]
    fn shapes_and_determinism() {
        let a: ParamSet<f64> = init_params(&cfg(6, 3));
        assert_eq!(a.shapes(), vec![(6, 5), (6, 6), (1, 6)]);
        assert_eq!(a, init_params(&cfg(6, 3)));
        assert_ne!(a, init_params(&cfg(6, 4)));
    }

    #[test]
    fn unit_gaussian_entries() {
        let p: ParamSet<f64> = init_params(&cfg(4096, 11));
        let flat = p.flatten();
        let n = flat.len() as f64;
        let mean = flat.iter().sum::<f64>() / n;
        let var = flat.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!(var > 0.98 && var < 1.02, "{var}");
    }

    #[test]
    fn flatten_roundtrip() {
        let p: ParamSet<f64> = init_params(&cfg(3, 1));
        assert_eq!(p.unflatten(&p.flatten()).unwrap(), p);
        assert!(p.unflatten(&[0.0]).is_err());
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let p: ParamSet<f64> = init_params(&cfg(3, 1));
        assert_eq!(sgd_step(&p, &p.zeros_like(), 0.7).unwrap(), p);
    }

    #[test]
    fn constant_gradient_steps_add() {
        let p: ParamSet<f64> = init_params(&cfg(3, 1));
        let g: ParamSet<f64> = init_params(&cfg(3, 2));
        let two = sgd_step(&sgd_step(&p, &g, 0.25).unwrap(), &g, 0.25).unwrap();
        let one = sgd_step(&p, &g, 0.5).unwrap();
        for (a, b) in two.flatten().iter().zip(one.flatten()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_single_parameter_lands_on_minimum() {
        // loss (θ-1)²/2 has gradient θ-1; lr 1 jumps straight to θ = 1.
        let theta = ParamSet { layers: vec![DenseMatrix::from_vec(1, 1, vec![3.5]).unwrap()] };
        let grad = ParamSet { layers: vec![DenseMatrix::from_vec(1, 1, vec![2.5]).unwrap()] };
        assert_eq!(sgd_step(&theta, &grad, 1.0).unwrap().flatten(), vec![1.0]);
    }
}
