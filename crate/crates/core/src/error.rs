use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter set: {0}")]
    InvalidParameters(String),

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian in {0}")]
    SingularJacobian(&'static str),

    #[error("Hopf correction converged to excluded frequency {omega}")]
    ExcludedFrequency { omega: f64 },

    #[error("no multiplier near -1: closest real multiplier is {closest:?}")]
    NotAPeriodDoubling { closest: Option<f64> },

    #[error("state norm {norm:.3e} exceeded the overflow guard at t = {time}")]
    Divergence { time: f64, norm: f64 },

    #[error("no candidate root: {0}")]
    NoCandidate(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("missing or unreadable artifact {0}; run the producing stage first")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
