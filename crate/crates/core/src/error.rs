use thiserror::Error;

/// Error type shared across the crate.
///
/// The variants map one-to-one onto the CLI exit codes, see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments: dimension mismatches, negative entries, empty lists.
    #[error("argument error: {0}")]
    Argument(String),

    /// Structurally valid input outside the mathematical domain of an
    /// operation (non-summable model, out-of-regime bound evaluation).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configured resource ceiling was hit before the requested accuracy
    /// or enumeration completed.
    #[error("resource ceiling exceeded: {0} (ceiling {ceiling})", ceiling = .1)]
    Resource(String, u64),

    /// Internal cross-check failed (e.g. a fitted quasi-polynomial does not
    /// reproduce exact lattice counts).
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) => 2,
            Error::Domain(_) => 3,
            Error::Resource(_, _) => 4,
            Error::Consistency(_) => 5,
            Error::Io(_) | Error::Json(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
