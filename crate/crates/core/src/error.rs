use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
///
/// Variants are grouped so that callers (the CLI in particular) can map them
/// onto distinct failure categories with [`Error::kind`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("state space too large: {classes} classes exceeds the enumeration cap of {cap}")]
    StateSpaceTooLarge { classes: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("population state outside E1: {0}")]
    InvalidState(String),

    #[error("step too large: entry ({class}, {level}) reached {value:e} at t = {time}; retry with a smaller step")]
    StepTooLarge {
        class: usize,
        level: usize,
        value: f64,
        time: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unstable parameters: {0}")]
    Unstable(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("simulation stopped after {events} events (safety cap); partial results attached")]
    EventCapExceeded {
        events: u64,
        partial: Box<crate::simulator::SimStats>,
    },
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: graph, parameters, shapes, configuration.
    Input,
    /// Target load outside the capacity region or unstable parameters.
    Infeasible,
    /// Numerical breakdown: non-convergence, LP failure, step-size trouble.
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidGraph(_)
            | Error::StateSpaceTooLarge { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidParameter(_)
            | Error::InvalidState(_)
            | Error::Unsupported(_)
            | Error::InsufficientData(_) => ErrorKind::Input,
            Error::Infeasible(_) | Error::Unstable(_) => ErrorKind::Infeasible,
            Error::LpFailure(_)
            | Error::NoConvergence { .. }
            | Error::StepTooLarge { .. }
            | Error::EventCapExceeded { .. } => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
