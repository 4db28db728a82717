use std::path::PathBuf;

/// Crate-wide error type.
///
/// Variants split along the line the CLI cares about: configuration and I/O
/// problems are usage errors (exit code 2), while shape or numeric-domain
/// violations discovered during computation are computation errors (exit
/// code 1).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed tensor file or config file.
    #[error("{}: {what}", path.display())]
    Format { path: PathBuf, what: String },

    /// A config value or function argument violates its documented range.
    #[error("invalid {field}: {why}")]
    Invalid { field: String, why: String },

    /// Tensor dimensions do not line up for the requested operation.
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: String,
        expected: String,
        got: String,
    },

    /// Numeric-domain violation detected while computing.
    #[error("{0}")]
    Domain(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, why: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            why: why.into(),
        }
    }

    pub fn shape(
        what: impl Into<String>,
        expected: impl Into<String>,
        got: impl Into<String>,
    ) -> Self {
        Error::Shape {
            what: what.into(),
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Format { .. } | Error::Invalid { .. } => 2,
            Error::Shape { .. } | Error::Domain(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
