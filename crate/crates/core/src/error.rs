use thiserror::Error;

use crate::nd::Shape;

/// Errors raised by arrays, distributions and bijectors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("incompatible shapes {a} and {b}")]
    IncompatibleShapes { a: Shape, b: Shape },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("rank error: {0}")]
    Rank(String),

    #[error("axis {axis} out of bounds for rank {rank}")]
    AxisOutOfBounds { axis: isize, rank: usize },

    #[error("dtype mismatch: {0}")]
    DTypeMismatch(String),

    #[error("invalid parameter `{param}`: {reason}")]
    InvalidParameter { param: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error("statistic `{0}` is NaN and allow_nan_stats is false")]
    NanStatistic(String),

    #[error("{0} is not reparameterized")]
    NotReparameterized(String),

    #[error("{0} is not invertible")]
    NotInvertible(String),

    #[error("autoregressive dependence violated: output {output} depends on input {input}")]
    DependenceViolation { output: usize, input: usize },

    #[error("autoregressive spec changed event shape from {from} to {to}")]
    NonConvergentSpec { from: Shape, to: Shape },

    #[error("kernel density estimate needs at least one point")]
    EmptyPoints,

    #[error("numerical routine failed: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(param: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            param: param.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
