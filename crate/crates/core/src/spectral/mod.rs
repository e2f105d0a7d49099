//! Empirical NTKs, spectral reports, lazy loss laws, kernel gradient flow
//! and time-ordered propagators.

pub mod flow;
pub mod kernel;
pub mod report;

pub use flow::{expm_neg, flow_from_eigen, kernel_flow, propagator, FlowResult};
pub use kernel::{ensemble_avg, entk, entk_layer_contributions, entk_layerwise, load_kernel, save_kernel, KernelMatrix, KernelNorm};
pub use report::{lazy_loss_curve, report_from_eigen, spectral_report, SpectralReport};
