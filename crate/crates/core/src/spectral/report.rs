use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::kernel::KernelMatrix;
use crate::error::{Error, Result};
use crate::numerics::eigen::DEFAULT_TOL;
use crate::numerics::{sym_eig, EigenDecomposition};
use crate::scalar::Scalar;

/// Eigenvalues of a kernel with the target's power in each eigenmode.
///
/// Inner products use the probe measure `⟨a, b⟩ = (1/P) Σ_μ a_μ b_μ` (summed over
/// channels), and eigenfunctions are normalized to unit probe-measure norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport<T> {
    /// `λ_k`, descending.
    pub eigenvalues: Vec<T>,
    /// `v_k = ⟨y, ψ_k⟩`.
    pub coefficients: Vec<T>,
    /// `C(k)` for `k = 1..=n+1`; entry `k − 1` is the power in modes `< k`.
    pub cumulative_power: Vec<T>,
    /// `⟨y²⟩`.
    pub target_norm: T,
    pub probe_count: usize,
}

impl<T: Scalar> SpectralReport<T> {
    /// `C(k)` with the 1-based index used in the definition.
    pub fn c(&self, k: usize) -> T {
        self.cumulative_power[k - 1]
    }

    /// CSV rows `k,lambda,coeff_sq,cumulative_power` for `k = 1..=n`, optionally prefixed.
    pub fn csv_rows(&self, prefix: &str, out: &mut String) {
        for (i, (l, v)) in self.eigenvalues.iter().zip(&self.coefficients).enumerate() {
            writeln!(out, "{prefix}{},{},{},{}", i + 1, l.as_f64(), (*v * *v).as_f64(), self.cumulative_power[i].as_f64()).unwrap();
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,lambda,coeff_sq,cumulative_power\n");
        self.csv_rows("", &mut s);
        s
    }
}

/// Spectral report from an existing eigendecomposition of the kernel.
pub fn report_from_eigen<T: Scalar>(eig: &EigenDecomposition<T>, points: usize, y: &[T]) -> Result<SpectralReport<T>> {
    if y.len() != eig.len() {
        return Err(Error::DimensionMismatch { context: "spectral target", expected: eig.len(), got: y.len() });
    }
    let p = T::from_usize(points).unwrap();
    let target_norm = y.iter().map(|v| *v * *v).sum::<T>() / p;
    if target_norm == T::zero() {
        return Err(Error::EmptyInput("spectral target has zero norm"));
    }
    let inv_sqrt_p = T::one() / p.sqrt();
    let coefficients: Vec<T> = eig.project(y).into_iter().map(|c| c * inv_sqrt_p).collect();
    let mut cumulative_power = Vec::with_capacity(coefficients.len() + 1);
    let mut acc = T::zero();
    cumulative_power.push(acc);
    for v in &coefficients {
        acc += *v * *v;
        cumulative_power.push(acc / target_norm);
    }
    Ok(SpectralReport { eigenvalues: eig.values.clone(), coefficients, cumulative_power, target_norm, probe_count: points })
}

/// Eigendecomposes `kernel` and projects the target `y` (point-major, length `P·C`).
pub fn spectral_report<T: Scalar>(kernel: &KernelMatrix<T>, y: &[T]) -> Result<SpectralReport<T>> {
    let eig = sym_eig(&kernel.matrix, T::lit(DEFAULT_TOL))?;
    report_from_eigen(&eig, kernel.points(), y)
}

/// `L(t) = Σ_k v_k² e^{−2 λ_k t}`.
pub fn lazy_loss_curve<T: Scalar>(report: &SpectralReport<T>, times: &[T]) -> Vec<T> {
    let two = T::lit(2.0);
    times.iter().map(|t| report.eigenvalues.iter().zip(&report.coefficients).map(|(l, v)| *v * *v * (-two * *l * *t).exp()).sum()).collect()
}
