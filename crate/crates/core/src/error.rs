use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("label column `{0}` not found in header")]
    MissingLabel(String),

    #[error("non-binary label {value:?} at data row {row}")]
    NonBinaryLabel { row: usize, value: String },

    #[error("numerical column `{0}` has no observed values")]
    DegenerateColumn(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field mismatch: {0}")]
    FieldMismatch(String),

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("b_sum lane is stale at row {row}: expected stamp {expected}, found {found}")]
    StaleBsum { row: usize, expected: u32, found: u32 },

    #[error("empty training data")]
    EmptyTrainingData,

    #[error("training diverged (non-finite weights)")]
    Diverged,

    #[error("non-finite input")]
    NonFinite,

    #[error("bad artifact magic")]
    BadMagic,

    #[error("unsupported artifact version {0}")]
    UnsupportedVersion(u32),

    #[error("checksum failure in artifact section `{0}`")]
    Checksum(String),

    #[error("corrupt artifact: {0}")]
    Corrupt(String),
}

impl Error {
    /// True for failures caused by the environment (files, streams) rather
    /// than by malformed inputs or configuration.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}
