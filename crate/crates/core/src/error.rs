use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |M[{row},{col}] - M[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch { context: &'static str, expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("hessian-vector product along a zero direction")]
    ZeroDirection,
    #[error("value {value} outside the domain of {what}")]
    DomainError { what: &'static str, value: f64 },
    #[error("operation requires {expected} mode")]
    WrongMode { expected: &'static str },
    #[error("layer {layer} out of range 1..={max}")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("centered kernel has vanishing Frobenius norm")]
    DegenerateKernel,
    #[error("reference logits have zero norm")]
    ZeroReference,
    #[error("need at least {needed} pooled samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("width {width} has {got} seeds; bias/variance needs at least 2")]
    InsufficientSeeds { width: usize, got: usize },
    #[error("loss diverged at step {step} (loss = {loss})")]
    DivergedLoss { step: u64, loss: f64 },
    #[error("{diverged} of {total} cells diverged")]
    PartialSweep { diverged: usize, total: usize },
    #[error("missing checkpoint {0}")]
    MissingCheckpoint(PathBuf),
    #[error("malformed artifact {path}: {reason}")]
    MalformedArtifact { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
