use thiserror::Error;

/// Errors raised by mesh, metric, model and assimilation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("meshes differ: {0}")]
    MeshMismatch(String),

    #[error("non-positive mesh density at node {node}: {value}")]
    NonPositiveDensity { node: usize, value: f64 },

    #[error("point {x} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("linear solve failed: {0}")]
    SingularSystem(String),

    #[error("step size underflow at t = {t}: dt = {dt} < dt_min = {dt_min} after {accepted} accepted steps")]
    StepUnderflow {
        t: f64,
        dt: f64,
        dt_min: f64,
        accepted: usize,
    },

    #[error("member {member} failed: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
