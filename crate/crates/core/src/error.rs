use thiserror::Error;

use crate::types::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the estimation and I/O routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation failed: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("{phase} phase has {len} points, at least {min} required")]
    PhaseTooShort {
        phase: &'static str,
        len: usize,
        min: usize,
    },

    #[error("index {index} outside 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// Whether the error came from bad input (as opposed to numerical trouble
    /// with otherwise valid input).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Degenerate(_))
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
