use std::path::PathBuf;

use serde::Serialize;

/// A single invalid configuration field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point lies outside the Poincare ball (c * |x|^2 = {0})")]
    OutsideBall(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("training diverged at {stage} {index}: loss is not finite")]
    Divergence { stage: &'static str, index: usize },

    #[error("evaluation budget of {budget} real evaluations exhausted")]
    BudgetExhausted { budget: u64 },

    #[error("fitness evaluation failed for subpopulation {subpopulation}: {source}")]
    Evaluation {
        subpopulation: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("stale forward cache: {0}")]
    StaleCache(String),

    #[error("invalid configuration: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Config(Vec<FieldError>),

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("run lacks audit data: {0}")]
    MissingAudit(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used by the CLI error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::OutsideBall(_) => "outside_ball",
            Error::NonFinite(_) => "non_finite",
            Error::Divergence { .. } => "divergence",
            Error::BudgetExhausted { .. } => "budget_exhausted",
            Error::Evaluation { .. } => "evaluation",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::StaleCache(_) => "stale_cache",
            Error::Config(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::UnknownProblem(_) => "unknown_problem",
            Error::MissingAudit(_) => "missing_audit",
            Error::Io { .. } => "io",
            Error::Serialization(_) => "serialization",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
