use std::fmt;

/// Library-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A problem or configuration value is structurally invalid.
    InvalidInput(String),
    /// A black-box evaluation failed; the row index of the failing point is
    /// reported when evaluation happens in bulk.
    Blackbox { row: Option<usize>, message: String },
    /// Gaussian process training could not produce a usable model.
    Training(String),
    /// Two problems share no design variables, so no transfer is possible.
    NoSharedVariables { source: String },
    /// (De)serialization failure.
    Serde(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Blackbox { row: Some(i), message } => {
                write!(f, "black-box evaluation failed at row {i}: {message}")
            }
            Error::Blackbox { row: None, message } => {
                write!(f, "black-box evaluation failed: {message}")
            }
            Error::Training(msg) => write!(f, "surrogate training failed: {msg}"),
            Error::NoSharedVariables { source } => {
                write!(f, "source problem '{source}' shares no variables with the target")
            }
            Error::Serde(msg) => write!(f, "serialization error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
