use crate::error::{Error, Result};
use crate::net::{hvp, NetConfig, ParamSet};
use crate::numerics::{dot, norm, DenseMatrix, RngState};
use crate::scalar::Scalar;

pub const SHARPNESS_REL_TOL: f64 = 1e-2;
pub const SHARPNESS_MAX_ITERS: usize = 200;
const START_SEED: u64 = 0x53_4841_5250;

/// Dominant eigenvalue of a symmetric operator by power iteration.
///
/// Stops when successive Rayleigh quotients differ by less than `rel_tol`
/// (relative); fails with [`Error::NoConvergence`] after `max_iters`.
pub fn power_iteration<T, F>(dim: usize, rel_tol: f64, max_iters: usize, mut op: F) -> Result<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let mut v: Vec<T> = RngState::new(START_SEED).gaussian_stream(dim).into_iter().map(T::lit).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let mut previous: Option<T> = None;
    for _ in 0..max_iters {
        let hv = op(&v)?;
        let rayleigh = dot(&v, &hv);
        if let Some(prev) = previous {
            if (rayleigh - prev).abs() <= T::lit(rel_tol) * rayleigh.abs() {
                return Ok(rayleigh);
            }
        }
        previous = Some(rayleigh);
        let hn = norm(&hv);
        if hn == T::zero() {
            return Ok(T::zero());
        }
        v = hv.into_iter().map(|x| x / hn).collect();
    }
    Err(Error::NoConvergence { what: "sharpness power iteration", iterations: max_iters })
}

/// Top eigenvalue of the loss Hessian on `(x, y)`.
pub fn sharpness<T: Scalar>(params: &ParamSet<T>, config: &NetConfig, x: &DenseMatrix<T>, y: &DenseMatrix<T>) -> Result<T> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("sharpness needs a non-empty batch"));
    }
    power_iteration(params.num_params(), SHARPNESS_REL_TOL, SHARPNESS_MAX_ITERS, |v| hvp(params, config, x, y, v))
}
