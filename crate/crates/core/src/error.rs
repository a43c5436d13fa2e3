use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("invalid reading {node_id}/{seq}: {reason}")]
    InvalidReading {
        node_id: String,
        seq: u64,
        reason: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "could not place {requested} potholes on a {length_m} m road after {attempts} attempts"
    )]
    InfeasiblePlacement {
        requested: usize,
        length_m: f64,
        attempts: usize,
    },

    #[error("position {x_m} m outside road of length {length_m} m")]
    OutOfRange { x_m: f64, length_m: f64 },

    #[error("calibration needs at least {min} readings, got {got}")]
    TooFewReadings { min: usize, got: usize },

    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
