use thiserror::Error;

use crate::stratify::Stratification;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("region has zero area")]
    DegenerateRegion,

    #[error("unknown field identifier `{0}`")]
    UnknownField(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("raster has no cells inside the region")]
    EmptyRaster,

    #[error("plan scheme mismatch: expected {expected}, found {found}")]
    SchemeMismatch { expected: String, found: String },

    #[error("sites do not match strata: {0}")]
    SiteMismatch(String),

    #[error("strata are not of equal size (relative spread {spread:.4} exceeds {tolerance})")]
    UnequalStrata { spread: f64, tolerance: f64 },

    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("stratum {0} is empty")]
    EmptyStratum(usize),

    /// Carries the best partition found so callers can inspect it.
    #[error("could not make every stratum connected: {message}")]
    Connectivity {
        message: String,
        best: Box<Stratification>,
    },

    #[error("geojson: {0}")]
    GeoJson(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
