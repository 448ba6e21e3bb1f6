use std::path::PathBuf;

use crate::problem::PrimalDualPoint;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (dimension mismatch, bad parameter).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The problem does not satisfy a standing assumption of the stability theory
    /// (LICQ, a nonempty set of active constraints plus equalities, ...).
    #[error("assumption violated: {0}")]
    Assumption(String),

    /// An inactive constraint index was classified inconsistently.
    #[error("classification error: {0}")]
    Classification(String),

    /// Random instance generation could not satisfy its construction rules.
    #[error("generation failed: {0}")]
    Generation(String),

    /// The integrator encountered a non-finite state.
    #[error("integration diverged at t = {t}")]
    Divergence { t: f64, last_finite: Box<PrimalDualPoint> },

    /// The adaptive step size fell below the representable minimum.
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    /// The step budget ran out before reaching the end time.
    #[error("step limit of {steps} reached at t = {t}")]
    StepLimit { t: f64, steps: usize },

    /// A residual target was not met before the time budget ran out.
    #[error("timeout after t = {t}: residual {residual:e} > tolerance {tol:e}")]
    Timeout {
        t: f64,
        residual: f64,
        tol: f64,
        best: Box<PrimalDualPoint>,
    },

    /// The Lyapunov matrix is not positive definite.
    #[error("certificate invalid: {0}")]
    CertificateInvalid(String),

    /// Feeder topology or data is inconsistent.
    #[error("invalid feeder: {0}")]
    Feeder(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
