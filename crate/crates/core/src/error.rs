use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no samples: accuracy needs at least one sample")]
    NoSamples,

    #[error("empty sequence")]
    EmptySequence,

    #[error("invalid log-likelihood {0}: token log-likelihoods must be <= 0")]
    InvalidLogLikelihood(f64),

    #[error("invalid {what}: {detail}")]
    InvalidValue { what: &'static str, detail: String },

    #[error("trajectory for {example_id} is empty at epoch {epoch}")]
    TrajectoryEmptyAt { example_id: String, epoch: f64 },

    #[error("empty collection: {0}")]
    EmptyCollection(&'static str),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("duplicate {what}: {key}")]
    Duplicate { what: &'static str, key: String },

    #[error("no difficulty metadata for example {0}")]
    NoDifficultyMetadata(String),

    #[error("example {0} has no original-variant record")]
    MissingOriginal(String),

    #[error("no examples below threshold {threshold} (minimum observed pre-memorization accuracy {min_observed})")]
    NoneBelowThreshold { threshold: f64, min_observed: f64 },

    #[error("unknown example id {0}")]
    UnknownExample(String),

    #[error("unknown variant {0}")]
    UnknownVariant(String),

    #[error("trainer failed at iteration {iteration}: {source}")]
    Trainer {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{} validation error(s); first: {}", .0.len(), .0.first().map(|e| e.to_string()).unwrap_or_default())]
    Validation(Vec<crate::io::ValidationError>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidValue {
            what,
            detail: detail.into(),
        }
    }
}
