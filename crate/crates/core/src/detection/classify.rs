use serde::{Deserialize, Serialize};

use super::Thresholds;
use crate::domain::{SensorReading, Severity};
use crate::par::{self, Mode};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub enum Confidence {
    #[default]
    Low,
    High,
}

/// Per-point classification outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointLabel {
    pub severity: Severity,
    /// Clearance beyond the severe cutoff.
    pub ultrasonic_hit: bool,
    /// Clearance above the baseline but not beyond the severe cutoff.
    pub maintenance_hit: bool,
    pub accel_hit: bool,
    pub confidence: Confidence,
}

/// Ultrasonic is the primary detector; the accelerometer alone is enough to
/// flag a pothole the ultrasonic sensor missed. Agreement of both channels
/// raises confidence.
pub fn classify_point(reading: &SensorReading, t: &Thresholds) -> PointLabel {
    let d = reading.ultrasonic_in;
    let ultrasonic_hit = d > t.severe_cutoff_in;
    let maintenance_hit = d > t.ultrasonic_base_in && d <= t.severe_cutoff_in;
    let accel_hit = reading.accel_z > t.accel_z_threshold;

    let severity = if ultrasonic_hit || accel_hit {
        Severity::Pothole
    } else if maintenance_hit {
        Severity::MaintenanceNeeded
    } else {
        Severity::Normal
    };
    let confidence = if ultrasonic_hit && accel_hit {
        Confidence::High
    } else {
        Confidence::Low
    };

    PointLabel {
        severity,
        ultrasonic_hit,
        maintenance_hit,
        accel_hit,
        confidence,
    }
}

pub fn classify_all(readings: &[SensorReading], t: &Thresholds, mode: Mode) -> Vec<PointLabel> {
    par::map(mode, readings, |r| classify_point(r, t))
}
