use std::path::PathBuf;

/// Every failure the engine can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("duplicate example id `{0}`")]
    DuplicateId(String),
    #[error("majority vote tie ({votes_class0} vs {votes_class1})")]
    Tie { votes_class0: usize, votes_class1: usize },
    #[error("split error: {0}")]
    Split(String),
    #[error("granularity error: {0}")]
    Granularity(String),
    #[error("missing or out-of-range direct difficulty for {} example(s): {}", ids.len(), ids.join(", "))]
    MissingAnnotation { ids: Vec<String> },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("empty stage: {0}")]
    EmptyStage(String),
    #[error("invalid stage sizes: {0}")]
    Size(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("degenerate class distribution: {0}")]
    DegenerateClass(String),
    #[error("need at least {needed} epochs, got {got}")]
    InsufficientEpochs { needed: usize, got: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("calibration failed for target {target:.4}; closest achievable easy fraction {closest:.4}")]
    CalibrationFailure { target: f64, closest: f64 },
    #[error("arm `{arm}`, seed {seed}")]
    Cell {
        arm: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the root cause is a numerical failure (divergence, non-finite values).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) => true,
            Error::Cell { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
