//! Threshold calibration, dual-sensor point classification, incremental
//! clustering of pothole points into events, and detection-quality metrics.

mod classify;
mod cluster;
mod metrics;
mod thresholds;

pub use classify::{classify_all, classify_point, Confidence, PointLabel};
pub use cluster::{cluster_events, ClusterOutcome, Clusterer, MemberRef, PotholeEvent};
pub use metrics::{detection_metrics, DetectionMetrics};
pub use thresholds::{
    calibrate, calibrate_with, Thresholds, DEFAULT_K_SIGMA, DEFAULT_SEVERE_DELTA_IN,
    MIN_CALIBRATION_READINGS,
};

use crate::domain::SensorReading;
use crate::par::Mode;

/// Default clustering radius, roughly one sample spacing on the reference route.
pub const DEFAULT_CLUSTER_RADIUS_M: f64 = 5.0;

/// Classifies every reading and clusters the pothole points, in input order.
pub fn detect(
    readings: &[SensorReading],
    thresholds: &Thresholds,
    cluster_radius_m: f64,
    mode: Mode,
) -> Vec<PotholeEvent> {
    let labels = classify_all(readings, thresholds, mode);
    let mut clusterer = Clusterer::new(cluster_radius_m);
    for (r, l) in readings.iter().zip(&labels) {
        clusterer.insert(r, l);
    }
    clusterer.into_events()
}
