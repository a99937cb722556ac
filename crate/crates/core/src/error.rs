use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsiError {
    #[error("grid dimension too small: nx = {nx}, nz = {nz} (both must be >= 4)")]
    DimensionTooSmall { nx: usize, nz: usize },

    #[error("channel length must be positive, got {0}")]
    NonpositiveLength(f64),

    #[error("admissibility violated: min(1 + eta) = {min_one_plus_eta} at node {node} (delta0 = {delta0})")]
    AdmissibilityViolated {
        min_one_plus_eta: f64,
        node: usize,
        delta0: f64,
    },

    #[error("nonpositive density {value} at node {node}")]
    NonpositiveDensity { value: f64, node: usize },

    #[error("density coefficient {value} at node {node} outside [{lower}, {upper}]")]
    CoefficientOutOfBounds {
        value: f64,
        node: usize,
        lower: f64,
        upper: f64,
    },

    #[error("linear solve did not converge: {iterations} iterations, relative residual {residual:e}")]
    LinearSolveDiverged { iterations: usize, residual: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("window underflow at t = {t}: window of {window_steps} steps failed ({reason}) and cannot be halved below {min_window_steps}")]
    WindowUnderflow {
        t: f64,
        window_steps: usize,
        min_window_steps: usize,
        reason: String,
    },

    #[error("incompatible initial data: {0}")]
    IncompatibleInitialData(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: format error: {message}")]
    Format { path: PathBuf, message: String },

    #[error("io error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl FsiError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        FsiError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        FsiError::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = FsiError> = std::result::Result<T, E>;
