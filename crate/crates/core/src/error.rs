use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A problem definition failed validation; `path` addresses the offending JSON node.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },

    #[error("value {value} is outside the domain of variable `{variable}`")]
    Domain { variable: String, value: i32 },

    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("feature index {index} out of range for a model with {len} features")]
    FeatureIndex { index: usize, len: usize },

    #[error("part index {index} out of range for a model with {len} parts")]
    PartIndex { index: usize, len: usize },

    #[error("conflicting values for variable `{variable}`: {left} vs {right}")]
    Conflict { variable: String, left: i32, right: i32 },

    #[error("partial configuration does not assign exactly the variables of part `{part}`")]
    PartMismatch { part: String },

    #[error("no feasible assignment; violated constraints: {}", violated.join(", "))]
    Infeasible { violated: Vec<String> },

    #[error("search space of {size} assignments exceeds the exhaustive limit of {limit}")]
    TooLarge { size: f64, limit: f64 },

    #[error("{0}")]
    Protocol(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}
