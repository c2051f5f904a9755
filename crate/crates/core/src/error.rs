use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel Hessian requested at its singular point")]
    SingularPoint,

    #[error("unsupported operator: {0}")]
    UnsupportedOperator(String),

    #[error("grid too coarse: {0}")]
    TooCoarse(String),

    #[error("geometry violation: {0}")]
    Geometry(String),

    #[error("no density detected: {0}")]
    NoDensity(String),

    #[error("sample domain too small: {0}")]
    DomainTooSmall(String),

    #[error("solver did not converge after {iterations} sweeps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("no bracket for target density {target} below t_max = {t_max}")]
    BracketNotFound {
        target: f64,
        t_max: f64,
        /// (t, f(t)) pairs evaluated while searching.
        curve: Vec<(f64, f64)>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
