use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("invalid net: {}", .0.join("; "))]
    InvalidNet(Vec<String>),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("unknown transition `{0}`")]
    UnknownTransition(String),

    #[error("token {token} is not present in place `{place}`")]
    TokenAbsent { place: String, token: String },

    #[error("log row {row}: {message}")]
    LogRow { row: usize, message: String },

    #[error("malformed log: {0}")]
    LogFormat(String),

    #[error("constraint syntax error at offset {offset}: {message}")]
    ConstraintSyntax { offset: usize, message: String },

    #[error("unresolvable reference in constraint: {0}")]
    Unresolved(String),

    #[error("log activity `{0}` does not name a task transition of the net")]
    UnknownActivity(String),

    #[error("deadlock before any event; final marking: {0}")]
    Deadlock(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("row has {got} features, tree expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from invalid input data (as opposed to I/O).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
