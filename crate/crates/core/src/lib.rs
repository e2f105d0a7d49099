//! Width-consistency laboratory: μP and SP multilayer perceptrons trained on
//! synthetic sphere tasks, together with the diagnostics used to compare
//! networks across widths (empirical NTK spectra, kernel gradient flow,
//! centered kernel alignment, preactivation statistics, ensemble
//! bias/variance and sharpness).
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what the experiment layer uses.

pub mod error;
pub mod experiments;
pub mod metrics;
pub mod net;
pub mod numerics;
pub mod scalar;
pub mod spectral;
pub mod tasks;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = numerics::DenseMatrix<f64>;
pub type Eigen = numerics::EigenDecomposition<f64>;
pub type Params = net::ParamSet<f64>;
pub type Trace = net::ForwardTrace<f64>;
pub type Kernel = spectral::KernelMatrix<f64>;
pub type Report = spectral::SpectralReport<f64>;
pub type Flow = spectral::FlowResult<f64>;
