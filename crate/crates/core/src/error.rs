use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or dimension-incompatible input.
    #[error("invalid input: {0}")]
    Input(String),
    /// A configuration that cannot be run (CFL violation, infeasible grid, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// Non-finite value produced during time stepping.
    #[error("numerical failure at step {step}: {msg}")]
    Numerical { step: usize, msg: String },
    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Payoff expression could not be parsed.
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
