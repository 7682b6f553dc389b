use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{kind} at line {line}, column {column}")]
    Parse {
        kind: ParseErrorKind,
        line: usize,
        column: usize,
    },

    #[error("graph too large for exact alignment: {vars} variables on the smaller side exceeds limit {limit}; use hill_climb_align")]
    TooLarge { vars: usize, limit: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("split sizes {got:?} do not sum to corpus size {expected}")]
    SplitSize { got: (usize, usize, usize), expected: usize },

    #[error("line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    UnbalancedParens,
    DuplicateVariable(String),
    UndefinedVariable(String),
    Unexpected(String),
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseErrorKind::Empty => write!(f, "empty input"),
            ParseErrorKind::UnbalancedParens => write!(f, "unbalanced parentheses"),
            ParseErrorKind::DuplicateVariable(v) => write!(f, "duplicate definition of variable `{v}`"),
            ParseErrorKind::UndefinedVariable(v) => write!(f, "reference to undefined variable `{v}`"),
            ParseErrorKind::Unexpected(t) => write!(f, "unexpected {t}"),
        }
    }
}
