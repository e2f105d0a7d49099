//! Forward pass, reverse-mode gradients and per-output Jacobians.

use super::config::NetConfig;
use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::numerics::{gemm, DenseMatrix, MatView};
use crate::scalar::Scalar;

/// Preactivations `h^1..h^L` (each `P x N`) and outputs `f` (`P x C`) on a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace<T> {
    pub preacts: Vec<DenseMatrix<T>>,
    pub outputs: DenseMatrix<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    /// `h^layer` for `layer` in `1..=L`.
    pub fn preact(&self, layer: usize) -> Result<&DenseMatrix<T>> {
        if layer == 0 || layer > self.preacts.len() {
            return Err(Error::LayerOutOfRange { layer, max: self.preacts.len() });
        }
        Ok(&self.preacts[layer - 1])
    }

    /// `φ(h^layer)`.
    pub fn activation(&self, layer: usize) -> Result<DenseMatrix<T>> {
        Ok(relu(self.preact(layer)?))
    }

    pub fn points(&self) -> usize {
        self.outputs.rows()
    }
}

#[inline]
pub fn relu<T: Scalar>(h: &DenseMatrix<T>) -> DenseMatrix<T> {
    h.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// ReLU derivative with `φ'(0) = 0`.
#[inline]
fn relu_mask<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// `scale * input * wᵀ` for a batch `input: P x in` and weights `w: out x in`.
fn apply_layer<T: Scalar>(input: &DenseMatrix<T>, w: &DenseMatrix<T>, scale: T) -> DenseMatrix<T> {
    let mut out = DenseMatrix::zeros(input.rows(), w.rows());
    gemm(
        scale,
        MatView::new(input.as_slice(), input.rows(), input.cols(), false),
        MatView::new(w.as_slice(), w.rows(), w.cols(), true),
        T::zero(),
        out.as_mut_slice(),
    );
    out
}

fn check_inputs<T: Scalar>(params: &ParamSet<T>, config: &NetConfig, x: &DenseMatrix<T>) -> Result<()> {
    params.check_config(config)?;
    if x.cols() != config.input_dim {
        return Err(Error::DimensionMismatch { context: "network input", expected: config.input_dim, got: x.cols() });
    }
    Ok(())
}

pub fn forward<T: Scalar>(params: &ParamSet<T>, config: &NetConfig, x: &DenseMatrix<T>) -> Result<ForwardTrace<T>> {
    check_inputs(params, config, x)?;
    let last = params.layers.len() - 1;
    let mut preacts = Vec::with_capacity(last);
    let mut h = apply_layer(x, &params.layers[0], T::lit(config.layer_scale(0)));
    for l in 1..last {
        let next = apply_layer(&relu(&h), &params.layers[l], T::lit(config.layer_scale(l)));
        preacts.push(h);
        h = next;
    }
    let outputs = apply_layer(&relu(&h), &params.layers[last], T::lit(config.layer_scale(last)));
    preacts.push(h);
    Ok(ForwardTrace { preacts, outputs })
}

/// Reverse pass from an output cotangent `dout` (`P x C`).
///
/// Returns `∂(Σ dout·f)/∂h^ℓ` for `ℓ = 1..L`, each `P x N`, computed per point.
pub fn backprop_deltas<T: Scalar>(
    params: &ParamSet<T>,
    config: &NetConfig,
    trace: &ForwardTrace<T>,
    dout: &DenseMatrix<T>,
) -> Vec<DenseMatrix<T>> {
    let last = params.layers.len() - 1;
    let mut deltas = vec![DenseMatrix::zeros(0, 0); last];
    let mut upstream = dout.clone();
    for l in (1..=last).rev() {
        let w = &params.layers[l];
        let mut d = DenseMatrix::zeros(upstream.rows(), w.cols());
        gemm(
            T::lit(config.layer_scale(l)),
            MatView::new(upstream.as_slice(), upstream.rows(), upstream.cols(), false),
            MatView::new(w.as_slice(), w.rows(), w.cols(), false),
            T::zero(),
            d.as_mut_slice(),
        );
        let h = &trace.preacts[l - 1];
        for (dv, hv) in d.as_mut_slice().iter_mut().zip(h.as_slice()) {
            *dv *= relu_mask(*hv);
        }
        deltas[l - 1] = d.clone();
        upstream = d;
    }
    deltas
}

/// Per-layer `(output cotangent, layer input, scale)` so that the gradient of
/// weight matrix `l` on point `μ` is `scale * cot[μ] ⊗ input[μ]`.
fn layer_factors<'a, T: Scalar>(
    config: &NetConfig,
    x: &'a DenseMatrix<T>,
    trace: &'a ForwardTrace<T>,
    deltas: &'a [DenseMatrix<T>],
    dout: &'a DenseMatrix<T>,
) -> Vec<(&'a DenseMatrix<T>, std::borrow::Cow<'a, DenseMatrix<T>>, T)> {
    let last = deltas.len();
    (0..=last)
        .map(|l| {
            let cot = if l == last { dout } else { &deltas[l] };
            let input = if l == 0 { std::borrow::Cow::Borrowed(x) } else { std::borrow::Cow::Owned(relu(&trace.preacts[l - 1])) };
            (cot, input, T::lit(config.layer_scale(l)))
        })
        .collect()
}

/// Parameter gradient of `Σ_μ dout[μ]·f(x_μ)`.
pub fn vjp<T: Scalar>(
    params: &ParamSet<T>,
    config: &NetConfig,
    x: &DenseMatrix<T>,
    trace: &ForwardTrace<T>,
    dout: &DenseMatrix<T>,
) -> ParamSet<T> {
    let deltas = backprop_deltas(params, config, trace, dout);
    let layers = layer_factors(config, x, trace, &deltas, dout)
        .into_iter()
        .map(|(cot, input, scale)| {
            let mut g = DenseMatrix::zeros(cot.cols(), input.cols());
            gemm(
                scale,
                MatView::new(cot.as_slice(), cot.rows(), cot.cols(), true),
                MatView::new(input.as_slice(), input.rows(), input.cols(), false),
                T::zero(),
                g.as_mut_slice(),
            );
            g
        })
        .collect();
    ParamSet { layers }
}

/// Mean squared error over points and channels, with the gradient of half of it.
///
/// Dividing by two makes gradient flow read `dΔ/dt = −K Δ` with no stray factors.
pub fn loss_and_grads<T: Scalar>(
    params: &ParamSet<T>,
    config: &NetConfig,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
) -> Result<(T, ParamSet<T>)> {
    loss_and_grads_offset(params, config, x, y, None)
}

/// As [`loss_and_grads`], with the prediction taken to be `f(x) − offset`.
pub fn loss_and_grads_offset<T: Scalar>(
    params: &ParamSet<T>,
    config: &NetConfig,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    offset: Option<&DenseMatrix<T>>,
) -> Result<(T, ParamSet<T>)> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("loss_and_grads needs at least one point"));
    }
    if y.rows() != x.rows() || y.cols() != config.output_dim {
        return Err(Error::DimensionMismatch { context: "targets", expected: x.rows() * config.output_dim, got: y.rows() * y.cols() });
    }
    let trace = forward(params, config, x)?;
    let mut resid = trace.outputs.clone();
    resid.add_scaled(y, -T::one())?;
    if let Some(off) = offset {
        resid.add_scaled(off, -T::one())?;
    }
    let count = T::from_usize(resid.rows() * resid.cols()).unwrap();
    let loss = resid.as_slice().iter().map(|r| *r * *r).sum::<T>() / count;
    resid.scale(T::one() / count);
    let grads = vjp(params, config, x, &trace, &resid);
    Ok((loss, grads))
}

/// Mean squared error of `outputs` against `targets`.
pub fn mse<T: Scalar>(outputs: &DenseMatrix<T>, targets: &DenseMatrix<T>) -> T {
    let n = T::from_usize(outputs.as_slice().len().max(1)).unwrap();
    outputs.as_slice().iter().zip(targets.as_slice()).map(|(f, y)| (*f - *y) * (*f - *y)).sum::<T>() / n
}

/// Jacobian of every output with respect to every parameter.
///
/// Row `μ*C + c` holds `∇_θ f_c(x_μ)` in [`ParamSet::flatten`] order.
pub fn per_output_jacobian<T: Scalar>(params: &ParamSet<T>, config: &NetConfig, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("per_output_jacobian needs at least one point"));
    }
    let trace = forward(params, config, x)?;
    let points = x.rows();
    let channels = config.output_dim;
    let nparams = params.num_params();
    let mut jac = DenseMatrix::zeros(points * channels, nparams);
    for c in 0..channels {
        let dout = DenseMatrix::from_fn(points, channels, |_, k| if k == c { T::one() } else { T::zero() });
        let deltas = backprop_deltas(params, config, &trace, &dout);
        let mut offset = 0;
        for (cot, input, scale) in layer_factors(config, x, &trace, &deltas, &dout) {
            let (out_dim, in_dim) = (cot.cols(), input.cols());
            for mu in 0..points {
                let row = jac.row_mut(mu * channels + c);
                let seg = &mut row[offset..offset + out_dim * in_dim];
                let a = input.row(mu);
                for (i, d) in cot.row(mu).iter().enumerate() {
                    let s = *d * scale;
                    for (dst, av) in seg[i * in_dim..(i + 1) * in_dim].iter_mut().zip(a) {
                        *dst = s * *av;
                    }
                }
            }
            offset += out_dim * in_dim;
        }
    }
    Ok(jac)
}

/// RMS over probes and neurons of the change in `h^L` after one SGD step on `(x, y)` at `lr`.
pub fn feature_movement<T: Scalar>(
    params: &ParamSet<T>,
    config: &NetConfig,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    probes: &DenseMatrix<T>,
    lr: T,
) -> Result<T> {
    let (_, grads) = loss_and_grads(params, config, x, y)?;
    let moved = super::params::sgd_step(params, &grads, lr)?;
    let layer = config.hidden_layers();
    let before = forward(params, config, probes)?;
    let after = forward(&moved, config, probes)?;
    let (a, b) = (before.preact(layer)?, after.preact(layer)?);
    let n = T::from_usize(a.as_slice().len().max(1)).unwrap();
    Ok((a.as_slice().iter().zip(b.as_slice()).map(|(u, v)| (*v - *u) * (*v - *u)).sum::<T>() / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, Activation, Parameterization};

    fn cfg(p: Parameterization, depth: usize, width: usize, d: usize, c: usize) -> NetConfig {
        NetConfig { depth, width, input_dim: d, output_dim: c, alpha0: 1.3, parameterization: p, activation: Activation::Relu, seed: 17 }
    }

    #[test]
    fn hand_computed_single_hidden_layer() {
        let config = NetConfig { alpha0: 2.0, ..cfg(Parameterization::Mup, 2, 4, 3, 1) };
        let params = ParamSet { layers: vec![DenseMatrix::from_fn(4, 3, |_, _| 1.0), DenseMatrix::from_fn(1, 4, |_, _| 1.0)] };
        let x = DenseMatrix::from_vec(1, 3, vec![0.2, 0.5, 0.3]).unwrap();
        let t = forward(&params, &config, &x).unwrap();
        let h = 1.0 / 3f64.sqrt();
        for v in t.preacts[0].as_slice() {
            assert!((v - h).abs() < 1e-15);
        }
        assert!((t.outputs[(0, 0)] - 2.0 * h).abs() < 1e-14);
    }

    #[test]
    fn zero_input_gives_zero_everything() {
        let config = cfg(Parameterization::Sp, 3, 5, 4, 2);
        let params: ParamSet<f64> = init_params(&config);
        let t = forward(&params, &config, &DenseMatrix::zeros(2, 4)).unwrap();
        assert!(t.preacts.iter().all(|h| h.as_slice().iter().all(|v| *v == 0.0)));
        assert!(t.outputs.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let config = cfg(Parameterization::Mup, 3, 5, 4, 1);
        let params: ParamSet<f64> = init_params(&config);
        assert!(matches!(forward(&params, &config, &DenseMatrix::zeros(2, 3)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let config = cfg(Parameterization::Mup, 3, 6, 4, 2);
        let params: ParamSet<f64> = init_params(&config);
        let x = DenseMatrix::from_fn(3, 4, |i, j| ((i * 4 + j) as f64 * 0.37).sin());
        let y = forward(&params, &config, &x).unwrap().outputs;
        let (loss, g) = loss_and_grads(&params, &config, &x, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn jacobian_of_duplicated_point_repeats_rows() {
        let config = cfg(Parameterization::Mup, 3, 5, 3, 2);
        let params: ParamSet<f64> = init_params(&config);
        let x = DenseMatrix::from_vec(2, 3, vec![0.1, -0.4, 0.7, 0.1, -0.4, 0.7]).unwrap();
        let j = per_output_jacobian(&params, &config, &x).unwrap();
        assert_eq!(j.row(0), j.row(2));
        assert_eq!(j.row(1), j.row(3));
    }

    #[test]
    fn readout_jacobian_is_scaled_activation() {
        let config = cfg(Parameterization::Mup, 3, 5, 3, 1);
        let params: ParamSet<f64> = init_params(&config);
        let x = DenseMatrix::from_vec(1, 3, vec![0.3, 0.9, -0.2]).unwrap();
        let j = per_output_jacobian(&params, &config, &x).unwrap();
        let t = forward(&params, &config, &x).unwrap();
        let phi = t.activation(2).unwrap();
        let off = config.num_params() - 5;
        for i in 0..5 {
            assert!((j[(0, off + i)] - config.readout_scale() * phi[(0, i)]).abs() < 1e-15);
        }
    }
}
