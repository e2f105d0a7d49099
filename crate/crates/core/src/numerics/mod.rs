//! Deterministic randomness, dense symmetric linear algebra and 1-D transport distances.

pub mod eigen;
pub mod matrix;
pub mod rng;
pub mod transport;

pub use eigen::{sym_eig, EigenDecomposition};
pub use matrix::{dot, gemm, norm, DenseMatrix, MatView};
pub use rng::{gaussian_stream, RngState};
pub use transport::wasserstein1;
