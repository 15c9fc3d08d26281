use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the formula it feeds.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid study summary '{study}': {reason}")]
    InvalidSummary { study: String, reason: String },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("no studies to pool")]
    EmptyInput,

    #[error("negative discriminant ({discriminant}) recovering table for {record}")]
    NegativeDiscriminant { record: String, discriminant: f64 },

    #[error("no feasible 2x2 table recovered for {0}")]
    NoFeasibleTable(String),

    #[error("perfect or quasi-complete separation in logistic fit: {0}")]
    Separation(String),

    #[error("logistic fit did not converge after {iterations} iterations; trace: {trace:?}")]
    NonConvergence {
        iterations: usize,
        trace: Vec<(f64, f64)>,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
