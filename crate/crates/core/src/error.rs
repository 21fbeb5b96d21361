use std::path::PathBuf;

/// Faults raised by the library. Report-style outcomes (validation,
/// comparison, condition checks) are returned as values, not errors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid medium: {0}")]
    Medium(String),

    #[error("configuration fault: {0}")]
    Config(String),

    #[error("CFL violation: dt = {dt} exceeds the monotone bound {bound}")]
    Cfl { dt: f64, bound: f64 },

    #[error("divergence at node {node} (x = {x:?}, t = {t}): value {value}")]
    Divergence {
        node: usize,
        x: Vec<f64>,
        t: f64,
        value: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("level set left the domain: {0}")]
    Truncation(String),

    #[error("profile fault: {0}")]
    Profile(String),

    #[error("geometry fault: {0}")]
    Geometry(String),

    #[error("speed map fault: {0}")]
    SpeedMap(String),

    #[error("front assembly fault: {0}")]
    Assembly(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear solve did not converge: residual {residual} after {iterations} iterations")]
    LinearSolve { residual: f64, iterations: usize },

    #[error("I/O fault at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
