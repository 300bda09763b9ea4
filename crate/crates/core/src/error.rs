use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Snapshot of the moment ratio when the global estimator cannot be formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    /// `zeta_bar - 4 h^2 v_bar`
    pub ratio_numerator: f64,
    /// `eta_bar - h^2 v_bar`
    pub ratio_denominator: f64,
    /// Tolerance the denominators were compared against.
    pub tolerance: f64,
    /// Hurst estimate after `log2+` and clamping, if it got that far.
    pub hurst_hat: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate denominator: {}", .0.reason)]
    DegenerateDenominator(Box<DegeneracyReport>),

    #[error("covariance matrix is not positive definite (pivot {pivot}, value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("invalid interpolation order {0}; must be at least 1")]
    InvalidOrder(usize),

    #[error("argument {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid bandwidth {0}; must be finite and positive")]
    InvalidBandwidth(f64),

    #[error("invalid distribution parameters: {0}")]
    InvalidDistributionParams(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
