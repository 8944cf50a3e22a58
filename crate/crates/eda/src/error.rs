use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, EdaError>;

/// Errors produced by the toolkit.
///
/// Variants split into three broad groups: configuration/usage problems,
/// data problems (malformed or inconsistent corpora, checkpoints, files),
/// and numeric failures during training or checking.
#[derive(Debug, Error)]
pub enum EdaError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("unknown dialogue act tag \"{code}\" (line {line})")]
    UnknownTag { code: String, line: usize },

    #[error("scheme violation on line {line}: {message}")]
    SchemeViolation { line: usize, message: String },

    #[error("dialogue \"{dialogue_id}\": expected turn_index {expected}, found {found}")]
    Sequencing {
        dialogue_id: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate utterance ({dialogue_id}, {turn_index})")]
    DuplicateTurn {
        dialogue_id: String,
        turn_index: usize,
    },

    #[error("index {index} out of range for dialogue of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("{0} must not be empty")]
    EmptyInput(&'static str),

    #[error("corpus has no utterances with the required labels")]
    EmptyCorpus,

    #[error("utterance ({dialogue_id}, {turn_index}) has no usable gold dialogue act")]
    MissingGold {
        dialogue_id: String,
        turn_index: usize,
    },

    #[error("non-finite loss at epoch {epoch}; aborting (try a smaller learning rate)")]
    NonFiniteLoss { epoch: usize },

    #[error("gradient check failed: {0}")]
    GradientCheck(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("tag inventory mismatch: {0}")]
    InventoryMismatch(String),

    #[error("missing checkpoint for annotator kind {0}")]
    MissingCheckpoint(String),

    #[error("axis \"{axis}\" is not declared by the corpus scheme")]
    AxisUnavailable { axis: String },

    #[error("unknown case filter: {0}")]
    UnknownFilter(String),

    #[error("malformed csv: {0}")]
    Csv(String),
}

impl EdaError {
    /// Wrap an i/o error with the path it occurred on.
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        EdaError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            EdaError::InvalidConfig(_) => 1,
            EdaError::NonFiniteLoss { .. } | EdaError::GradientCheck(_) => 3,
            _ => 2,
        }
    }
}
