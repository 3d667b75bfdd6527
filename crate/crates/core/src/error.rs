use thiserror::Error;

/// Problems found while loading or validating a problem document.
#[derive(Debug, Error)]
pub enum SpecError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("`{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("`{key}`: knots not strictly increasing")]
    Knots { key: String },
    #[error("cost floor violated: floor must be positive, got {0}")]
    NonPositiveFloor(f64),
    #[error("cost floor violated: c({t}, {z:?}) = {cost} < {floor}")]
    CostFloor {
        t: f64,
        z: Vec<f64>,
        cost: f64,
        floor: f64,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Misuse of a state, impulse or time against the problem's domain.
#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("impulse {0:?} is not in the impulse set")]
    UnknownImpulse(Vec<f64>),
    #[error("state {0:?} is not inside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid time step {dt} for horizon remainder {remaining}")]
    InvalidStep { dt: f64, remaining: f64 },
    #[error("time {t} outside [{lo}, {hi}]")]
    TimeRange { t: f64, lo: f64, hi: f64 },
    #[error("node {0} is on the boundary; stencil unavailable")]
    BoundaryNode(usize),
    #[error("{0}")]
    Arity(String),
}

/// Crate-wide error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Qvi(#[from] crate::qvi::QviError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::LatticeError),
    #[error("stale field: solver did not converge")]
    StaleField,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed artifact: {0}")]
    Artifact(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
