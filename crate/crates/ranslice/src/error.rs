//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zone {zone} (center {center_km} km) is outside every BS coverage disk")]
    UncoveredZone { zone: usize, center_km: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("vehicle density {density} outside [0, {max_density}]")]
    OutOfRangeDensity { density: f64, max_density: f64 },

    #[error("trace parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: String,
    },

    #[error("unstable queue at BS {bs}: service rate {service_rate} <= arrival rate {arrival_rate}")]
    UnstableQueue {
        bs: usize,
        service_rate: f64,
        arrival_rate: f64,
    },

    #[error("zone {zone} has zero velocity; handover delay undefined in a jammed window")]
    ZeroVelocity { zone: usize },

    #[error("trace is empty")]
    EmptyTrace,

    #[error("episode finished after {windows} windows")]
    EndOfTrace { windows: usize },

    #[error("capacity {capacity} cannot give each of {services} services one unit")]
    CapacityImpossible { capacity: u32, services: usize },

    #[error("inner solver failed to converge: kkt residual {kkt_residual} after {iterations} iterations")]
    ConvergenceFailure {
        kkt_residual: f64,
        iterations: usize,
        instance_json: String,
    },

    #[error("grid oracle limited to 3 overlapped zones, got {0}")]
    ScaleGuard(usize),

    #[error("unstable parameters: service rate {service_rate} <= arrival rate {arrival_rate}")]
    UnstableParameters { service_rate: f64, arrival_rate: f64 },

    #[error("config error: {field}: {message}")]
    Config { field: String, message: String },

    #[error("checkpoint does not match the supplied config: {0}")]
    CheckpointMismatch(String),

    #[error("training diverged: non-finite parameter in {network} at episode {episode}")]
    NumericalDivergence { network: String, episode: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
