use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The conjugation argmax kept sitting on the search boundary: the declared
    /// coercivity function is too small for this Hamiltonian.
    #[error("Hamiltonian is not coercive enough at q = {q}: argmax stuck at |p| = {radius}")]
    NonCoercive { q: f64, radius: f64 },

    #[error("minimizer stuck on the candidate radius {radius} at x = {x} after doubling")]
    RadiusExhausted { x: f64, radius: f64 },

    #[error("CFL condition violated: diffusion number {diffusion:.3e}, advection number {advection:.3e}")]
    CflViolation { diffusion: f64, advection: f64 },

    #[error("time step {delta} does not divide horizon {horizon}")]
    StepMismatch { delta: f64, horizon: f64 },

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("policy iteration did not converge within {iterations} iterations at t = {t}")]
    PolicyNonConvergence { iterations: usize, t: f64 },

    #[error("cannot fit a rate: {0}")]
    DegenerateFit(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),

    #[error("config error in [{section}] {key}: {message}")]
    Config {
        section: String,
        key: String,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(section: &str, key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            section: section.to_string(),
            key: key.to_string(),
            message: message.into(),
        }
    }
}
