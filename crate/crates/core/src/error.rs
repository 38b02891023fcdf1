use std::io;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("operator is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Explicit enumeration of the prior's difference set would exceed the budget.
    /// `implicit_available` distinguishes priors with closed-form coherence
    /// and RIP handling (sparse) from those without.
    #[error("enumeration budget exceeded ({required} > {budget}); implicit representation available: {implicit_available}")]
    BudgetExceeded {
        required: u128,
        budget: u128,
        implicit_available: bool,
    },

    #[error("vector norm {norm} is below one; unit truncation undefined")]
    TruncationUndefined { norm: f64 },

    #[error("row {index} has positive coherence but zero sampling probability")]
    InfiniteComplexity { index: usize },

    #[error("all coherences are zero")]
    ZeroCoherence,

    #[error("relative error undefined for a zero truth signal")]
    ZeroSignal,

    #[error("malformed input: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
