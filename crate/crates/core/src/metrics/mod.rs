//! Representation and convergence diagnostics.

pub mod ensemble;
pub mod kernels;
pub mod preact;
pub mod sharpness;
pub mod similarity;

pub use ensemble::{bias_variance, BiasVariance, EnsembleStep, EnsembleTable, MemberStep};
pub use kernels::{feature_kernel, gradient_kernel, gradient_signals, input_kernel};
pub use preact::{cross_width_w1, preact_stats, PreactSnapshot, PreactSummary};
pub use sharpness::{power_iteration, sharpness};
pub use similarity::{cka, relative_rmse};

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
