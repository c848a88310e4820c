use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// Every variant carries a human-readable detail string and maps to a stable
/// machine-readable code (see [`Error::code`]) used by the CLI error envelope
/// and the C ABI.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),
    #[error("matrix is singular: {0}")]
    Singular(String),
    #[error("conjugate time reached: {0}")]
    ConjugateTime(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("size guard exceeded: {0}")]
    Guard(String),
    #[error("outside invertibility window: {0}")]
    Window(String),
    #[error("integration failure: {0}")]
    Integration(String),
    #[error("time grid mismatch: {0}")]
    Interpolation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable identifier for machine consumers.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "DIMENSION",
            Error::NonFinite(_) => "NON_FINITE",
            Error::NotSpd(_) => "NOT_SPD",
            Error::Singular(_) => "SINGULAR",
            Error::ConjugateTime(_) => "CONJUGATE_TIME",
            Error::InvalidProblem(_) => "INVALID_PROBLEM",
            Error::Argument(_) => "ARGUMENT",
            Error::Guard(_) => "GUARD",
            Error::Window(_) => "WINDOW",
            Error::Integration(_) => "INTEGRATION",
            Error::Interpolation(_) => "INTERPOLATION",
            Error::Solver(_) => "SOLVER",
            Error::Io(_) => "IO",
            Error::Parse(_) => "PARSE",
        }
    }

    /// Numeric code, stable across releases. Zero is reserved for success.
    pub fn numeric_code(&self) -> i32 {
        match self {
            Error::Dimension(_) => 1,
            Error::NonFinite(_) => 2,
            Error::NotSpd(_) => 3,
            Error::Singular(_) => 4,
            Error::ConjugateTime(_) => 5,
            Error::InvalidProblem(_) => 6,
            Error::Argument(_) => 7,
            Error::Guard(_) => 8,
            Error::Window(_) => 9,
            Error::Integration(_) => 10,
            Error::Interpolation(_) => 11,
            Error::Solver(_) => 12,
            Error::Io(_) => 13,
            Error::Parse(_) => 14,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
