//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("xs has {xs} entries but ys has {ys}")]
    LengthMismatch { xs: usize, ys: usize },

    #[error("{what}[{index}] is not finite")]
    NonFinite { what: &'static str, index: usize },

    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { got: usize, needed: usize },

    #[error("breakpoint vector is invalid: {0}")]
    InvalidBreakpoints(String),

    #[error("segment {segment} contains no data points")]
    EmptySegment { segment: usize },

    #[error("breakpoint {value} coincides with a data abscissa")]
    BreakpointOnDatum { value: f64 },

    #[error("linear system is singular or numerically unreliable: {0}")]
    SingularSystem(String),

    #[error("no candidate breakpoint positions: {0}")]
    NoCandidates(String),

    #[error("search space too large: {0}")]
    TooLarge(String),

    #[error("no feasible configuration: {0}")]
    Infeasible(String),

    #[error("target vector is constant; relative metric is undefined")]
    ConstantTarget,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
