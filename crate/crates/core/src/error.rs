use thiserror::Error;

pub type Result<T, E = ModeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ModeError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("design matrix is rank deficient: rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("grid has {size} points, exceeding the cap of {cap}")]
    GridTooLarge { size: u128, cap: usize },

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("chain too short: {len} draws, at least {min} required")]
    ChainTooShort { len: usize, min: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("Lagrange multiplier solve did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("base-distribution endpoint too small: d = {endpoint} but residual {residual} needs a larger window")]
    EndpointTooSmall { endpoint: f64, residual: f64 },

    #[error("sigma prior interval ({low}, {high}) is not increasing; choose a different rule pair")]
    BadInterval { low: f64, high: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ModeError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        ModeError::Domain(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        ModeError::Dimension(msg.into())
    }
}
