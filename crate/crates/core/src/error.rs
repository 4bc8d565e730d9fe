use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Ingest { path: String, message: String },

    #[error("saturation {value} of phase {phase} is outside [0, 1]")]
    SaturationDomain { phase: usize, value: f64 },

    #[error("singular matrix: zero pivot in column {column}")]
    SingularMatrix { column: usize },

    #[error("simulation aborted at t = {time} s: {reason}")]
    Aborted { time: f64, reason: String },

    #[error("unknown case `{name}`; available cases: {available}")]
    UnknownCase { name: String, available: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
