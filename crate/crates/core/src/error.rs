use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the pipeline.
///
/// Variants fall into two classes that the CLI maps to distinct exit codes:
/// input problems (bad files, schemas, parameters out of their domain) and
/// numerical failures detected during inference or scoring.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter outside its domain: {0}")]
    ParameterDomain(String),

    #[error("value outside the support of the family: {0}")]
    Support(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("ill-conditioned matrix: {0}")]
    Conditioning(String),

    #[error("cannot sample from posterior: {0}")]
    Sampling(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("schema error at line {line}: {msg}")]
    Schema { line: usize, msg: String },

    #[error("parse error at row {row}, column '{column}': {msg}")]
    Parse { row: usize, column: String, msg: String },

    #[error("unsupported schema: {0}")]
    UnsupportedSchema(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("lower bound decreased from {previous} to {current} at iteration {iteration}")]
    ElboDecrease {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Conditioning(_)
                | Error::Sampling(_)
                | Error::Numerical(_)
                | Error::ElboDecrease { .. }
        )
    }
}
