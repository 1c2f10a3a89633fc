//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape or axis mismatch between tensor operands.
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A precondition of an operation was violated.
    #[error("contract violation in {op}: {detail}")]
    Contract { op: &'static str, detail: String },

    /// A combination of inputs with no defined semantics (e.g. analytic
    /// Gaussian KL against a logistic prior).
    #[error("unsupported combination: {0}")]
    Unsupported(String),

    /// Malformed binary container (bad magic, bad header fields).
    #[error("format error in {path}: {detail}")]
    Format { path: String, detail: String },

    /// Payload shorter or longer than the header declares.
    #[error("length error in {path}: {detail}")]
    Length { path: String, detail: String },

    /// Two inputs that must agree do not (e.g. image/label counts).
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Checkpoint written by an incompatible format version.
    #[error("version mismatch: found {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    /// NaN or infinity where a finite value is required.
    #[error("non-finite {what} in {name}")]
    NonFinite { what: &'static str, name: String },

    /// Bad run configuration (unknown key, unparsable value, missing field).
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn dimension(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { op, detail: detail.into() }
    }

    pub fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Contract { op, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
