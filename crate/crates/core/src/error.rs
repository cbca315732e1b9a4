use thiserror::Error;

/// Errors raised by manifold, flow, bundle and transport operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("retraction undefined at {point:?}: norm below {radius:e}")]
    RetractionUndefined { point: Vec<f64>, radius: f64 },

    #[error("point {point:?} is off the manifold (residual {residual:e})")]
    OffManifold { point: Vec<f64>, residual: f64 },

    #[error("non-finite value while integrating field {field} at {point:?}")]
    Integration { field: String, point: Vec<f64> },

    #[error("scalar field {field} is not positive at {point:?} (value {value})")]
    PositivityViolation { field: String, point: Vec<f64>, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain mismatch: {0}")]
    Domain(String),

    #[error("invalid reparametrization: {0}")]
    InvalidReparametrization(String),

    #[error("degenerate split at t = {t}: must lie strictly inside ({start}, {end})")]
    DegenerateSplit { t: f64, start: f64, end: f64 },

    #[error("path is not a loop: endpoints are {gap:e} apart")]
    NotALoop { gap: f64 },

    #[error("singular linear map: {0}")]
    Singular(String),

    #[error("unknown {kind} name {name:?}")]
    UnknownName { kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, GeoError>;
