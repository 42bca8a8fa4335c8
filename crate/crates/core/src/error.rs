use std::path::PathBuf;

use crate::instance::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(ValidationReport),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rider `{rider}` has zero arrival rate but positive probing mass")]
    MassOnIdleRider { rider: String },

    #[error("edge `{edge}` is not incident to rider `{rider}`")]
    ForeignEdge { edge: String, rider: String },

    #[error("instance is not unit-capacity: driver `{driver}` has capacity {capacity}")]
    NotUnitCapacity { driver: String, capacity: u32 },

    #[error("policy is not ready: {0}")]
    PolicyNotReady(String),

    #[error("instance exceeds exact enumeration bounds: {0}")]
    EnumerationBounds(String),

    #[error("LP solve did not reach optimality: {0:?}")]
    NotOptimal(crate::lp::Status),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
