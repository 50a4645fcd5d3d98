use std::io;

use thiserror::Error;

use crate::allocator::DutyVector;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("evaluation point (r={r}, z={z}) lies on a current filament")]
    SingularPoint { r: f64, z: f64 },

    #[error("point (r={r}, dz={dz}) is within 1 mm of the winding region")]
    InsideWinding { r: f64, dz: f64 },

    #[error("magnet center (r={r}, z={z}) is outside the allowed workspace")]
    OutOfWorkspace { r: f64, z: f64 },

    #[error("query (r={r}, dz={dz}) is outside the force map domain")]
    OutOfGrid { r: f64, dz: f64 },

    #[error("requested force is infeasible, residual {residual:.6} N")]
    Infeasible { residual: f64, duties: DutyVector },

    #[error("trajectory has no keyframes")]
    EmptyTrajectory,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed force map: {0}")]
    Format(String),

    #[error("duty frame has bad sync byte {0:#04x}")]
    BadSync(u8),

    #[error("duty frame checksum mismatch (expected {expected:#04x}, found {found:#04x})")]
    BadChecksum { expected: u8, found: u8 },

    #[error("duty frame must be {expected} bytes, got {found}")]
    BadLength { expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
