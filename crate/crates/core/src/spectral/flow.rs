//! Kernel gradient flow `dΔ/dt = −K Δ` and its time-ordered propagator.

use serde::{Deserialize, Serialize};

use super::kernel::KernelMatrix;
use crate::error::{Error, Result};
use crate::numerics::eigen::DEFAULT_TOL;
use crate::numerics::{sym_eig, DenseMatrix, EigenDecomposition};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowResult<T> {
    pub times: Vec<T>,
    /// `Δ(t)` per time, point-major over channels.
    pub residuals: Vec<Vec<T>>,
    /// `(1/P) Σ_{μ,c} Δ_{μc}(t)²`.
    pub loss: Vec<T>,
}

/// Exact solution `Δ(t) = V e^{−Λt} Vᵀ y` given the kernel's eigendecomposition.
pub fn flow_from_eigen<T: Scalar>(eig: &EigenDecomposition<T>, points: usize, y: &[T], times: &[T]) -> Result<FlowResult<T>> {
    if y.len() != eig.len() {
        return Err(Error::DimensionMismatch { context: "flow initial condition", expected: eig.len(), got: y.len() });
    }
    let coeffs = eig.project(y);
    let p = T::from_usize(points).unwrap();
    let mut residuals = Vec::with_capacity(times.len());
    let mut loss = Vec::with_capacity(times.len());
    for &t in times {
        let delta = eig.expand(&coeffs, |k| (-eig.values[k] * t).exp());
        loss.push(delta.iter().map(|d| *d * *d).sum::<T>() / p);
        residuals.push(delta);
    }
    Ok(FlowResult { times: times.to_vec(), residuals, loss })
}

/// Solves `dΔ/dt = −K Δ`, `Δ(0) = y`, for a FLOW kernel with any number of channels.
pub fn kernel_flow<T: Scalar>(kernel: &KernelMatrix<T>, y: &[T], times: &[T]) -> Result<FlowResult<T>> {
    let eig = sym_eig(&kernel.matrix, T::lit(DEFAULT_TOL))?;
    flow_from_eigen(&eig, kernel.points(), y, times)
}

/// `exp(−K t)` for symmetric `K`.
pub fn expm_neg<T: Scalar>(k: &DenseMatrix<T>, t: T) -> Result<DenseMatrix<T>> {
    Ok(sym_eig(k, T::lit(DEFAULT_TOL))?.spectral_map(|l| (-l * t).exp()))
}

/// Transition matrices `T(t_i)` for `dT/dt = −K(t) T`, `T(0) = I`.
///
/// `kernels[i]` is held constant on `[t_i, t_{i+1})`, so
/// `T(t_{i+1}) = exp(−K_i (t_{i+1} − t_i)) T(t_i)`.
pub fn propagator<T: Scalar>(kernels: &[KernelMatrix<T>], times: &[T]) -> Result<Vec<DenseMatrix<T>>> {
    let first = kernels.first().ok_or(Error::EmptyInput("propagator needs at least one kernel"))?;
    if times.first() != Some(&T::zero()) {
        return Err(Error::DomainError {
            what: "propagator start time (must be 0)",
            value: times.first().map_or(f64::NAN, |t| t.as_f64()),
        });
    }
    if kernels.len() + 1 < times.len() {
        return Err(Error::ShapeMismatch(format!("{} kernels cannot cover {} time points", kernels.len(), times.len())));
    }
    for k in &kernels[1..] {
        first.check_compatible(k)?;
    }
    let mut out = Vec::with_capacity(times.len());
    let mut current = DenseMatrix::identity(first.size());
    out.push(current.clone());
    for (i, w) in times.windows(2).enumerate() {
        let dt = w[1] - w[0];
        if dt < T::zero() {
            return Err(Error::DomainError { what: "propagator times (must ascend)", value: w[1].as_f64() });
        }
        current = expm_neg(&kernels[i].matrix, dt)?.matmul(&current)?;
        out.push(current.clone());
    }
    Ok(out)
}
