use thiserror::Error;

/// Errors raised by the numerical kernels, the dynamics and the experiments.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration value violates its constraint. `key` names the
    /// offending parameter, e.g. `chi.k`.
    #[error("{key}: {message}")]
    Config { key: String, message: String },

    /// Two fields or a field and an operator do not share a grid, or an
    /// argument lies outside the documented range of an operation.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input contains NaN or infinite values.
    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    /// The sensitivity function is evaluated at or beyond its pole.
    #[error("singular sensitivity: a + s = {0} is not positive")]
    SingularSensitivity(f64),

    /// Argument outside the domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),

    /// Iterative linear solver hit its iteration cap.
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    /// Density dropped below the discrete positivity tolerance.
    #[error("positivity violated at cell {cell}: u = {value:e} (t = {t})")]
    Positivity { cell: usize, value: f64, t: f64 },

    /// A step failed; carries the time of failure.
    #[error("run failed at t = {t}: {source}")]
    RunFailed {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    /// A sweep run failed for the given lambda. `blowup` is set when the
    /// run halted at the blow-up ceiling rather than with an error.
    #[error("sweep aborted at lambda = {lambda}: {reason}")]
    SweepAborted { lambda: f64, reason: String, blowup: bool },

    /// A precondition of an experiment does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
