use std::path::PathBuf;

use thiserror::Error;

use crate::backtranslate::BtError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input {}: {reason}", path.display())]
    MalformedFile { path: PathBuf, reason: String },

    #[error("schema violation in {}: {reason}", path.display())]
    SchemaViolation { path: PathBuf, reason: String },

    #[error("duplicate article for event {event} source {outlet}")]
    DuplicateArticle { event: String, outlet: String },

    #[error("annotation span {start}..{end} outside sentence {sentence} ({len} chars)")]
    DanglingAnnotation {
        sentence: String,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("alias cycle: `{raw}` maps to `{canonical}`, which is itself aliased to `{next}`")]
    AliasCycle {
        raw: String,
        canonical: String,
        next: String,
    },

    #[error("unknown target `{0}`")]
    UnknownTarget(String),

    #[error("too few events: {0}")]
    TooFewEvents(String),

    #[error("invalid split ratios {0:?}: must sum to 100")]
    InvalidRatios((u32, u32, u32)),

    #[error("invalid augmentation fraction {0}% (allowed: 0, 10, 20, 30, 40, 50, 100)")]
    InvalidFraction(u32),

    #[error("fold {fold} out of range for k = {k}")]
    FoldOutOfRange { fold: usize, k: usize },

    #[error("infeasible target balance: {0}")]
    InfeasibleBalance(String),

    #[error(transparent)]
    Backtranslation(#[from] BtError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o failure on {}: {source}", path.display())]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }
}
