use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid degree {0}: the family needs d >= 2")]
    InvalidDegree(u32),

    #[error("parameter has {got} marked critical points, degree {degree} needs {expected}")]
    ParameterLength {
        degree: u32,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("problem size {size} exceeds the cap {cap}: {what}")]
    TooLarge {
        what: &'static str,
        size: u128,
        cap: u128,
    },

    #[error("evaluation failed at cell {index:?}: {reason}")]
    Cell { index: Vec<usize>, reason: String },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("pullback step {step} failed: {reason}")]
    Pullback { step: usize, reason: String },

    #[error("malformed field file at byte {offset}: {reason}")]
    Malformed { offset: u64, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("png encoding failed: {0}")]
    Png(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
