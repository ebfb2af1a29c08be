use thiserror::Error;

use crate::propagator::Solution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a time integration stopped before reaching its end time.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AbortReason {
    /// `h1mg_norm` exceeded the configured multiple of its initial value.
    Blowup { time: f64, norm: f64, ceiling: f64 },
    /// Mass outside the middle half of the box exceeded the run limit.
    Leakage { time: f64, fraction: f64, limit: f64 },
}

impl AbortReason {
    pub fn time(&self) -> f64 {
        match *self {
            AbortReason::Blowup { time, .. } | AbortReason::Leakage { time, .. } => time,
        }
    }
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            AbortReason::Blowup { time, norm, ceiling } => {
                write!(f, "blowup detected at t={time}: h1mg norm {norm:.6e} exceeds ceiling {ceiling:.6e}")
            }
            AbortReason::Leakage { time, fraction, limit } => {
                write!(f, "boundary leakage at t={time}: fraction {fraction:.3e} exceeds {limit:.1e}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDivergence { residual: f64, iterations: usize },

    #[error("initial data leaks to the boundary: fraction {fraction:.3e} outside the middle half exceeds {limit:.1e}")]
    InitialLeakage { fraction: f64, limit: f64 },

    /// The run stopped early; the partial trajectory and diagnostics are kept.
    #[error("{reason}")]
    Aborted { reason: AbortReason, partial: Box<Solution> },

    #[error("nonlinearity is not symmetrizable: g'({rho:.6e}) = {slope:.6e} is not positive")]
    NotSymmetrizable { rho: f64, slope: f64 },

    #[error("time step {dt:.3e} violates the stability limit {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("grid of {points} points per axis cannot resolve the oscillation; need at least {required}")]
    ResolutionInsufficient { points: usize, required: usize },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("config error in [{section}] {key}: {message}")]
    Config { section: String, key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(section: &str, key: &str, message: impl Into<String>) -> Self {
        Error::Config { section: section.to_owned(), key: key.to_owned(), message: message.into() }
    }

    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParameter(_) | Error::DimensionMismatch(_) => 2,
            Error::SolverDivergence { .. } => 3,
            Error::Aborted { reason: AbortReason::Blowup { .. }, .. } => 4,
            Error::Aborted { reason: AbortReason::Leakage { .. }, .. } | Error::InitialLeakage { .. } => 5,
            _ => 1,
        }
    }
}
