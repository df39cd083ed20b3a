use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A sample lacks a field required by the objective.
    #[error("sample `{id}`: missing required field `{field}`")]
    MissingField { id: String, field: &'static str },

    #[error("sample `{id}`: {reason}")]
    Validation { id: String, reason: String },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("numeric error at `{id}`: {reason}")]
    Numeric { id: String, reason: String },

    /// The candidate's Schur complement fell below the degenerate floor.
    #[error("candidate `{id}` is a degenerate duplicate of the current set")]
    DegenerateDuplicate { id: String },

    #[error("stale gain probe: the diversity state changed since the gain was computed")]
    StaleProbe,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("combinatorial budget exceeded: {subsets} subsets > {limit}")]
    Budget { subsets: u128, limit: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numeric(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Numeric {
            id: id.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn validation(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            id: id.into(),
            reason: reason.into(),
        }
    }
}
