use thiserror::Error;

/// Errors raised by the decoders, numerical kernels and the simulation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("search space of {bits:.2} bits exceeds the exhaustive-search guard of {limit} bits")]
    SearchTooLarge { bits: f64, limit: u32 },

    #[error("grid is empty: {0}")]
    EmptyGrid(String),

    #[error("matrix is zero")]
    ZeroMatrix,

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("decoder `{decoder}` unsupported: {reason}")]
    Unsupported { decoder: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
