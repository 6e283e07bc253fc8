use thiserror::Error;

use crate::io::ParseError;
use crate::model::{Diagnostic, ExprError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by model construction and the numerical engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("valuation is not well-defined: {0}")]
    NotWellDefined(String),

    #[error("region changes the support of a distribution: {0}")]
    GraphChange(String),

    #[error("expected reward diverges: {0}")]
    DivergentReward(String),

    #[error("bounds are not suitable: {0}")]
    SuitabilityViolation(String),

    #[error("flat model needs {states} states, above the cap of {cap}")]
    CapExceeded { states: u64, cap: u64 },

    #[error("call #{0} is not covered by any bounds source")]
    CoverageGap(usize),

    #[error("value iteration did not converge within {0} iterations")]
    NotConverged(usize),

    #[error("state {state} has {count} local parameters; at most {max} are supported")]
    TooManyParameters {
        state: usize,
        count: usize,
        max: usize,
    },

    #[error("local optimality cannot be guaranteed for {} call state(s)", .0.len())]
    LocalOptimality(Vec<usize>),

    #[error("invalid model ({} diagnostic(s)); first: {}", .0.len(), .0.first().map(|d| d.to_string()).unwrap_or_default())]
    Invalid(Vec<Diagnostic>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("refinement stopped after {iterations} iterations with bounds [{lb}, {ub}]")]
    IterationCap { iterations: usize, lb: f64, ub: f64 },

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{0}")]
    Io(String),
}
