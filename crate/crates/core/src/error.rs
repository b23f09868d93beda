use thiserror::Error;

use crate::scheme::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// The inner solver stopped before reaching the requested tolerance.
    /// `best` is the iterate with the smallest residual seen.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("time step tau = {tau} must be below tau_star = {tau_star}")]
    StepSize { tau: f64, tau_star: f64 },

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("time {t} outside trajectory range [0, {t_max}]")]
    Range { t: f64, t_max: f64 },

    #[error("invalid pairing: {0}")]
    InvalidPairing(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    /// A run stopped at `step`; the states computed so far are kept.
    #[error("run aborted at step {step}: {source}")]
    RunAborted {
        step: usize,
        #[source]
        source: Box<Error>,
        partial: Box<Trajectory>,
    },
}

impl Error {
    pub(crate) fn shape(what: &'static str, expected: usize, found: usize) -> Self {
        Error::Shape {
            what,
            expected,
            found,
        }
    }

    /// True when the root cause is an inner-solver convergence failure.
    pub fn is_convergence(&self) -> bool {
        match self {
            Error::Convergence { .. } => true,
            Error::RunAborted { source, .. } => source.is_convergence(),
            _ => false,
        }
    }
}
