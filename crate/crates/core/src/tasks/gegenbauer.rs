//! Gegenbauer polynomials normalized to unit second moment on the sphere.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::sphere::sample_sphere;
use crate::error::{Error, Result};
use crate::numerics::RngState;

/// Monte-Carlo sample count for the normalization constant.
pub const NORM_SAMPLES: usize = 1_000_000;
/// Fixed seed of the normalization estimate.
pub const NORM_SEED: u64 = 0x6E6F_726D_5345_4544;

/// Classical `C_k^{(λ)}(t)` from the three-term recurrence.
pub fn gegenbauer_c(k: usize, lambda: f64, t: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 2.0 * lambda * t;
    for n in 2..=k {
        let nf = n as f64;
        let next = (2.0 * (nf + lambda - 1.0) * t * cur - (nf + 2.0 * lambda - 2.0) * prev) / nf;
        prev = cur;
        cur = next;
    }
    cur
}

/// `λ = (D − 2)/2`, the Gegenbauer index matched to `S^{D−1}`.
pub fn sphere_lambda(dim: usize) -> f64 {
    (dim as f64 - 2.0) / 2.0
}

/// `sqrt(E_{x∼S^{D−1}}[C_k(x₀)²])`, estimated once per `(k, D)` and cached.
pub fn normalization(k: usize, dim: usize) -> Result<f64> {
    if dim < 3 {
        return Err(Error::DomainError { what: "Gegenbauer dimension (needs D >= 3)", value: dim as f64 });
    }
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().expect("cache lock").get(&(k, dim)) {
        return Ok(*v);
    }
    let lambda = sphere_lambda(dim);
    let mut rng = RngState::new(NORM_SEED).substream_indexed("gegenbauer-norm", dim as u64);
    let xs = sample_sphere(&mut rng, dim, NORM_SAMPLES);
    let second = (0..NORM_SAMPLES).map(|i| gegenbauer_c(k, lambda, xs[(i, 0)]).powi(2)).sum::<f64>() / NORM_SAMPLES as f64;
    let norm = second.sqrt();
    cache.lock().expect("cache lock").insert((k, dim), norm);
    Ok(norm)
}

/// Normalized `Q_k(t)` with `E[Q_k(β·x)²] = 1` for `x` uniform on `S^{D−1}`.
pub fn gegenbauer_q(k: usize, dim: usize, t: f64) -> Result<f64> {
    if !(t.abs() <= 1.0 + 1e-12) {
        return Err(Error::DomainError { what: "Gegenbauer argument", value: t });
    }
    let norm = normalization(k, dim)?;
    Ok(gegenbauer_c(k, sphere_lambda(dim), t.clamp(-1.0, 1.0)) / norm)
}
