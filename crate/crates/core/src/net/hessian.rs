use super::config::NetConfig;
use super::mlp::loss_and_grads;
use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::numerics::{norm, DenseMatrix};
use crate::scalar::Scalar;

/// Relative size of the finite-difference probe along `v`.
pub const HVP_REL_STEP: f64 = 1e-4;

/// Hessian-vector product of a gradient map by central differences.
///
/// Evaluates `grad` at `θ ± εv` with `ε = 1e-4·‖θ‖/‖v‖` (`‖θ‖` floored at 1).
pub fn hvp_with<T, G>(theta: &[T], v: &[T], grad: G) -> Result<Vec<T>>
where
    T: Scalar,
    G: Fn(&[T]) -> Result<Vec<T>>,
{
    if theta.len() != v.len() {
        return Err(Error::DimensionMismatch { context: "hvp direction", expected: theta.len(), got: v.len() });
    }
    let vn = norm(v);
    if vn == T::zero() {
        return Err(Error::ZeroDirection);
    }
    let eps = T::lit(HVP_REL_STEP) * norm(theta).max(T::one()) / vn;
    let shifted = |s: T| -> Vec<T> { theta.iter().zip(v).map(|(t, d)| *t + s * *d).collect() };
    let gp = grad(&shifted(eps))?;
    let gm = grad(&shifted(-eps))?;
    let inv = T::one() / (eps + eps);
    Ok(gp.iter().zip(&gm).map(|(a, b)| (*a - *b) * inv).collect())
}

/// `H v` for the Hessian of the mean squared error loss on `(x, y)`.
pub fn hvp<T: Scalar>(params: &ParamSet<T>, config: &NetConfig, x: &DenseMatrix<T>, y: &DenseMatrix<T>, v: &[T]) -> Result<Vec<T>> {
    let theta = params.flatten();
    hvp_with(&theta, v, |t| {
        let p = params.unflatten(t)?;
        // loss_and_grads differentiates loss/2; the Hessian is of the loss itself.
        let (_, g) = loss_and_grads(&p, config, x, y)?;
        Ok(g.flatten().into_iter().map(|gi| gi + gi).collect())
    })
}
