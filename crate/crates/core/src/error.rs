use thiserror::Error;

/// Errors raised by the library and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("tap sequence of length {taps} does not fit a {q}-point grid")]
    TapsTooLong { taps: usize, q: usize },

    #[error("fold factor {l} does not divide grid size {q}")]
    FoldMismatch { q: usize, l: usize },

    #[error("spectral density must be nonnegative, found {value} at index {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sequence length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("packets {first} and {second} share dither index {dither} mod {l}")]
    DuplicateDither {
        first: usize,
        second: usize,
        dither: usize,
        l: usize,
    },

    #[error("Gram matrix is not positive definite at symbol {index} (pivot {pivot})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
