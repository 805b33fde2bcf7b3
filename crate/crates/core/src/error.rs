use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation too close to the spectrum: {0}")]
    NearSpectrum(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ODE solver failure at x = {x}: step size {h:e} underflowed after {steps} steps")]
    SolverFailure { x: f64, h: f64, steps: usize },

    #[error("eigenvalue bracket failure for k = {k}: {detail}")]
    Bracket { k: usize, detail: String },

    #[error("energy {energy} lies within {tol:e} of an eigenvalue; count is ambiguous")]
    Ambiguous { energy: f64, tol: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("refinement error: {0}")]
    Refinement(String),

    #[error("numerical invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the user's input rather than by a computation.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
