use thiserror::Error;

/// Errors raised by the arithmetic, group and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("modulus {modulus} exceeds the enumeration cutoff {cutoff}")]
    AboveCutoff { modulus: u64, cutoff: u64 },

    #[error("{value} is not a unit modulo {modulus}")]
    NotAUnit { value: u64, modulus: u64 },

    #[error("character-sum identity is {deviation:e} away from an integer (tolerance {tolerance:e})")]
    NotIntegral { deviation: f64, tolerance: f64 },

    #[error("alpha sequence is not non-increasing at k = {k}")]
    NotMonotone { k: usize },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
