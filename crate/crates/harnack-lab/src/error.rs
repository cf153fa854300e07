use thiserror::Error;

/// Errors produced by the numerical toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A point or value fell outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested value is outside the attainable range of a function.
    #[error("{what} = {value} is outside the attainable range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A quadrature, solver, or iteration failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A model was asked for data it is not configured with.
    #[error("configuration error: {0}")]
    Config(String),

    /// A data file failed to parse; carries the 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
