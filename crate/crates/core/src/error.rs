use thiserror::Error;

/// Errors produced by meshing, local solves, marching and configuration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spatial mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid tent geometry: {0}")]
    InvalidTent(String),

    #[error("CFL condition violated: {0}")]
    CflViolation(String),

    #[error("vertex {vertex} cannot be pitched: {reason}")]
    NoAdmissiblePole { vertex: usize, reason: String },

    #[error("local system is singular (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("tent {tent}: inflow vertex {vertex} has not been resolved")]
    OrderingViolation { tent: usize, vertex: usize },

    #[error("tent {tent} failed: {source}")]
    TentFailure {
        tent: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("mesher made no progress after {iterations} iterations (front at t={front_min})")]
    NoProgress { iterations: usize, front_min: f64 },

    #[error("final front is not flat (spread {spread:.3e})")]
    NonFlatFront { spread: f64 },

    #[error("time {t} outside the covered range [0, {t_max}]")]
    TimeOutOfRange { t: f64, t_max: f64 },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::Json(_)
                | Error::InvalidMesh(_)
                | Error::InvalidMaterial(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
