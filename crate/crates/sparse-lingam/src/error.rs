use thiserror::Error;

/// Errors produced by data ingestion, preprocessing, and the solver stack.
#[derive(Error, Debug)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing value at line {line}, column {col}")]
    MissingData { line: usize, col: usize },

    #[error("column {col} has zero variance and cannot be standardized")]
    DegenerateColumn { col: usize },

    #[error("covariance is rank-deficient (relative eigenvalue {ratio:.3e} below 1e-10)")]
    RankDeficient { ratio: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("row {row} has zero norm")]
    DegenerateRow { row: usize },

    #[error("divergence detected: {0}; consider a smaller learning rate")]
    Divergence(String),

    #[error("zero diagonal entry at row {row} after permutation; cannot rescale")]
    Rescale { row: usize },

    #[error("model selection failed: {0}")]
    Selection(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
