use thiserror::Error;

use crate::C64;

/// Failures raised by the numerical routines.
///
/// Every variant maps onto a short machine-readable category (see
/// [`Error::category`]) that the command-line front end prints next to its
/// exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("both preimages of {target} are equidistant from the hint {hint}")]
    AmbiguousBranch { target: C64, hint: C64 },

    #[error("{what} did not converge after {iterations} iterations (last change {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("requested level {requested} exceeds available level {available}")]
    LevelExceeded { requested: u32, available: u32 },

    #[error("{at} is within the pole guard of a pole")]
    Pole { at: C64 },

    #[error("logarithm argument {arg} lies on the branch cut")]
    BranchCut { arg: C64 },

    #[error("inverse branch fixing 0 and -delta is not resolvable at {at}")]
    WrongBranch { at: C64 },

    #[error("pressure has the same sign at both ends of the bracket ({low:e}, {high:e})")]
    BracketFailure { low: f64, high: f64 },

    #[error("quadrature error estimate {estimate:e} exceeds the requested tolerance {tolerance:e}")]
    ToleranceNotMet { estimate: f64, tolerance: f64 },

    #[error("dimension {0} is outside (1, 1.5)")]
    InvalidDimension(f64),

    #[error("no sign change on [{low}, {high}]")]
    NoSignChange { low: f64, high: f64 },

    #[error("parameter {0} is outside the closed main component B(1,1) union {{0}}")]
    OutsideMainDisk(C64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cache: {0}")]
    Cache(String),
}

impl Error {
    /// Stable upper-case category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::AmbiguousBranch { .. } => "AMBIGUOUS_BRANCH",
            Error::NoConvergence { .. } => "NO_CONVERGENCE",
            Error::LevelExceeded { .. } => "LEVEL_EXCEEDED",
            Error::Pole { .. } => "POLE",
            Error::BranchCut { .. } => "BRANCH_CUT",
            Error::WrongBranch { .. } => "WRONG_BRANCH",
            Error::BracketFailure { .. } => "BRACKET_FAILURE",
            Error::ToleranceNotMet { .. } => "TOLERANCE_NOT_MET",
            Error::InvalidDimension(_) => "INVALID_DIMENSION",
            Error::NoSignChange { .. } => "NO_SIGN_CHANGE",
            Error::OutsideMainDisk(_) => "OUTSIDE_MAIN_DISK",
            Error::InvalidInput(_) => "INVALID_INPUT",
            Error::Cache(_) => "CACHE",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
