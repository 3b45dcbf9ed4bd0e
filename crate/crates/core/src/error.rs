use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenoError>;

#[derive(Debug, Error)]
pub enum BenoError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("solver did not converge after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed header in {}: {found:?}", .path.display())]
    MalformedHeader { path: PathBuf, found: String },

    #[error("row count mismatch in {}: expected {expected}, found {found}", .path.display())]
    RowCountMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BenoError {
    /// Stable short code used by the CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            BenoError::InvalidParameter(_) => "invalid_parameter",
            BenoError::DegenerateGeometry(_) => "degenerate_geometry",
            BenoError::ShapeMismatch(_) => "shape_mismatch",
            BenoError::NonFinite(_) => "non_finite",
            BenoError::NotConverged { .. } => "not_converged",
            BenoError::UndefinedMetric(_) => "undefined_metric",
            BenoError::EmptySplit(_) => "empty_split",
            BenoError::MissingFile(_) => "missing_file",
            BenoError::MalformedHeader { .. } => "malformed_header",
            BenoError::RowCountMismatch { .. } => "row_count_mismatch",
            BenoError::Parse(_) => "parse",
            BenoError::Config(_) => "config",
            BenoError::Diverged { .. } => "diverged",
            BenoError::Io(_) => "io",
        }
    }
}
