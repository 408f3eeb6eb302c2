use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate item `{0}` in catalog")]
    DuplicateItem(String),

    #[error("catalog bucket {split}-{tier} is empty")]
    EmptyBucket { split: String, tier: String },

    #[error("failed to parse {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("item `{item}` has tier {actual}, expected {expected}")]
    TierMismatch {
        item: String,
        expected: String,
        actual: String,
    },

    #[error("items `{high}` and `{low}` belong to different splits")]
    SplitMismatch { high: String, low: String },

    #[error("expected a {expected} instance, got `{id}`")]
    WrongKind { expected: &'static str, id: String },

    #[error("expression sign is indeterminate over the wager region: {0}")]
    IndeterminateSign(String),

    #[error("no unique maximum expected gain for `{0}`")]
    NonUniqueOptimum(String),

    #[error("scorer `{scorer}` needs side data: {what}")]
    MissingSideData { scorer: String, what: String },

    #[error("score {value} for `{id}` is outside [0, 1] in already-normalized mode")]
    ScoreOutOfRange { id: String, value: f64 },

    #[error("external scorer protocol violation: {0}")]
    Protocol(String),

    #[error("external scorer timed out waiting for `{0}`")]
    Timeout(String),

    #[error("predictions do not line up with the dataset: {0}")]
    IdMismatch(String),

    #[error("no belief recorded for pair ({high}, {low})")]
    MissingBelief { high: String, low: String },

    #[error("empty evaluation set: {0}")]
    EmptyEvaluation(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    IoBare(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(what: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Parse {
            what: what.into(),
            source,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
