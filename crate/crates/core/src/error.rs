use thiserror::Error;

/// Errors raised by the radar library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("p must be an odd prime, got {0}")]
    NotOddPrime(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigendecomposition of the shift operator for k={k} produced repeated eigenvalues (gap {gap:e})")]
    RepeatedEigenvalue { k: usize, gap: f64 },

    #[error("dense matrix would need {entries} entries, above the cap of {cap}")]
    MemoryCap { entries: usize, cap: usize },

    #[error("measurement is identically zero; a finite SNR cannot be met")]
    ZeroSignal,

    #[error("hypothesis violated: {0} (pass force to run anyway)")]
    HypothesisViolated(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
