use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: unknown tag `{symbol}`")]
    UnknownTag { line: usize, symbol: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("alignments belong to different pairs ({0} vs {1})")]
    PairMismatch(u64, u64),

    #[error("stage contract violated: {0}")]
    Contract(String),

    #[error("non-finite loss at epoch {epoch}, sentence {sentence}")]
    NonFiniteLoss { epoch: usize, sentence: usize },

    #[error("model format version {found} is not supported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 for configuration errors, 3 for unreadable,
    /// unwritable or malformed files, 4 for any other violated stage contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_) => 2,
            Error::File { .. } | Error::Io(_) | Error::Parse { .. } | Error::UnknownTag { .. } | Error::Json(_) => 3,
            _ => 4,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }
}
