use alloc::string::String;

use crate::program::Family;

/// Errors shared by every solver and generator in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("entry {value} at ({row}, {col}) is outside [0, 1]")]
    OutOfRange { row: usize, col: usize, value: f64 },

    #[error("instance too large for enumeration: {combinations} combinations exceeds guard {guard}")]
    TooLarge { combinations: f64, guard: f64 },

    #[error("infeasible: no allocation satisfies the {0} constraints")]
    Infeasible(Family),

    #[error("search limits reached without an incumbent (best bound {best_bound})")]
    NoSolution { best_bound: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unbounded linear program")]
    Unbounded,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn dimension(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
