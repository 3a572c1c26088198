use thiserror::Error;

#[derive(Debug, Error)]
pub enum TetotError {
    /// Malformed file: bad magic, version, dtype, or truncated payload.
    #[error("format error: {0}")]
    Format(String),

    /// Well-formed input carrying invalid values (non-finite, out-of-range labels).
    #[error("data error: {0}")]
    Data(String),

    /// Caller-side contract violation: shape mismatch, missing labels, bad weights.
    #[error("input error: {0}")]
    Input(String),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("brute-force oracle supports n <= 8, got n = {0}")]
    Size(usize),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TetotError>;
