//! Per-layer feature kernels `Φ^ℓ` and gradient kernels `G^ℓ`.

use crate::error::{Error, Result};
use crate::net::{backprop_deltas, forward, ForwardTrace, NetConfig, ParamSet};
use crate::numerics::{gemm, DenseMatrix, MatView};
use crate::scalar::Scalar;
use crate::spectral::{KernelMatrix, KernelNorm};

/// `(1/n) A Aᵀ` for row features `A` of width `n`.
fn normalized_gram<T: Scalar>(a: &DenseMatrix<T>, n: usize) -> DenseMatrix<T> {
    let mut out = DenseMatrix::zeros(a.rows(), a.rows());
    gemm(
        T::one() / T::from_usize(n).unwrap(),
        MatView::new(a.as_slice(), a.rows(), a.cols(), false),
        MatView::new(a.as_slice(), a.rows(), a.cols(), true),
        T::zero(),
        out.as_mut_slice(),
    );
    out.symmetrize();
    out
}

/// `Φ^ℓ = (1/N) φ(h^ℓ) φ(h^ℓ)ᵀ` for `ℓ = 1..=L`.
pub fn feature_kernel<T: Scalar>(trace: &ForwardTrace<T>, layer: usize) -> Result<KernelMatrix<T>> {
    let h = trace.preact(layer)?;
    let phi = crate::net::relu(h);
    KernelMatrix::new(normalized_gram(&phi, h.cols()), 1, KernelNorm::Raw)
}

/// Input kernel `Φ⁰ = (1/D) x xᵀ`.
pub fn input_kernel<T: Scalar>(x: &DenseMatrix<T>) -> Result<KernelMatrix<T>> {
    KernelMatrix::new(normalized_gram(x, x.cols()), 1, KernelNorm::Raw)
}

/// Backpropagated signals `g^ℓ = N ∂f/∂h^ℓ` on every probe (`P x N`), for scalar outputs.
pub fn gradient_signals<T: Scalar>(
    params: &ParamSet<T>,
    config: &NetConfig,
    probes: &DenseMatrix<T>,
    layer: usize,
) -> Result<DenseMatrix<T>> {
    let hidden = config.hidden_layers();
    if layer == 0 || layer > hidden {
        return Err(Error::LayerOutOfRange { layer, max: hidden });
    }
    if config.output_dim != 1 {
        return Err(Error::DimensionMismatch { context: "gradient kernel output channels", expected: 1, got: config.output_dim });
    }
    let trace = forward(params, config, probes)?;
    let ones = DenseMatrix::from_fn(probes.rows(), 1, |_, _| T::one());
    let deltas = backprop_deltas(params, config, &trace, &ones);
    Ok(deltas[layer - 1].clone().scaled(T::from_usize(config.width).unwrap()))
}

/// `G^ℓ = (1/N) g^ℓ g^ℓᵀ` with `g^ℓ = N ∂f/∂h^ℓ`, `ℓ = 1..=L`.
pub fn gradient_kernel<T: Scalar>(
    params: &ParamSet<T>,
    config: &NetConfig,
    probes: &DenseMatrix<T>,
    layer: usize,
) -> Result<KernelMatrix<T>> {
    let g = gradient_signals(params, config, probes, layer)?;
    KernelMatrix::new(normalized_gram(&g, config.width), 1, KernelNorm::Raw)
}
