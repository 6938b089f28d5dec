use std::io;

/// Errors produced by the pansharpening library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed image file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The energy rose on consecutive iterations under the automatic step size.
    #[error(
        "step size too large: energy rose from {previous:e} to {current:e} at iteration {iteration} (tau = {tau:e})"
    )]
    StepSize {
        iteration: usize,
        previous: f64,
        current: f64,
        tau: f64,
    },

    #[error("unsupported combination: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
