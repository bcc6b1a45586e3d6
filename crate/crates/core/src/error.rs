use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operation requires a nonempty population")]
    EmptyPopulation,

    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid scalar field: {0}")]
    InvalidField(String),

    #[error("invalid branching model: {0}")]
    InvalidModel(String),

    #[error("invalid immigration mechanism: {0}")]
    InvalidImmigration(String),

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    /// A series or tail could not be truncated to the requested accuracy.
    #[error("truncation failed: {0}")]
    Truncation(String),

    /// The implicit end-point iteration of the marching scheme needs `dt * sup(alpha) < 1`.
    #[error("time step too large: dt * sup(alpha) = {product} >= 1 (dt = {dt}); use a smaller dt")]
    Contraction { dt: f64, product: f64 },

    #[error("implicit end-point iteration did not converge at t = {t} (residual {residual:e}); use a smaller dt")]
    NonConvergence { t: f64, residual: f64 },

    #[error("time {t} lies beyond the solved horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("not certified ergodic: {0}")]
    NotCertifiedErgodic(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
