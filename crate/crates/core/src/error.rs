use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid permutation literal {text:?}: {reason}")]
    Format { text: String, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("m = {m} is outside the supported range {min}..={max}")]
    OutOfRange { m: usize, min: usize, max: usize },

    #[error("invalid partition: {0}")]
    Partition(String),

    /// The requested computation exceeds the configured work budget.
    #[error("refusing {what}: needs about {estimate} units of work (limit {limit})")]
    Budget {
        what: String,
        estimate: String,
        limit: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed input: {0}")]
    Input(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn budget(what: impl Into<String>, estimate: f64, limit: f64) -> Self {
        Error::Budget {
            what: what.into(),
            estimate: format!("{estimate:.3e}"),
            limit: format!("{limit:.3e}"),
        }
    }

    /// True for refusals caused by problem size rather than bad input.
    pub fn is_feasibility(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
