use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or a violated modeling assumption.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A caller-side precondition of a solver was not met (e.g. incompatible rhs).
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{solver} did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("advective CFL violated at step {step}: courant number {courant:.3} > {limit}; reduce dt below {dt_max:.3e}")]
    Cfl {
        step: usize,
        courant: f64,
        limit: f64,
        dt_max: f64,
    },

    #[error("simulation diverged at step {step} (t = {t}): non-finite value in {field}")]
    Diverged {
        step: usize,
        t: f64,
        field: &'static str,
    },

    #[error("interface probe error: {0}")]
    Probe(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("internal check failed: {0}")]
    Internal(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Short machine-readable category used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::Parse { .. } => "config",
            Error::Precondition(_) => "precondition",
            Error::NonConvergence { .. } => "solver",
            Error::Cfl { .. } => "cfl",
            Error::Diverged { .. } => "diverged",
            Error::Probe(_) => "probe",
            Error::Fit(_) => "fit",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
