//! Core of the PoDAS pothole-detection pipeline.
//!
//! This crate holds everything that is independent of transport and storage:
//! the shared vocabulary types ([`domain`]), the deterministic road and sensor
//! simulator ([`roadsim`]), the threshold calibration / classification /
//! clustering logic ([`detection`]), the uplink wire format ([`wire`]) and
//! the seed sweep used to evaluate detection quality ([`sweep`]).
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise.

pub mod detection;
pub mod domain;
pub mod error;
pub mod jsonl;
pub mod par;
pub mod roadsim;
pub mod scenario;
pub mod sweep;
pub mod wire;

pub use detection::{
    calibrate, calibrate_with, classify_point, cluster_events, detection_metrics, Clusterer,
    Confidence, DetectionMetrics, PointLabel, PotholeEvent, Thresholds,
};
pub use domain::{haversine_m, GeoPoint, SensorReading, Severity, EARTH_RADIUS_M};
pub use error::{Error, Result};
pub use roadsim::{NoiseModel, PotholeSpec, RoadProfile, VehicleConfig};
pub use wire::{IngestAck, ReadingBatch, WireReading};
