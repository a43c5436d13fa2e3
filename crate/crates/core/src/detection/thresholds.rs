use serde::{Deserialize, Serialize};

use crate::domain::SensorReading;
use crate::error::{Error, Result};

pub const MIN_CALIBRATION_READINGS: usize = 30;
pub const DEFAULT_SEVERE_DELTA_IN: f64 = 4.0;
pub const DEFAULT_K_SIGMA: f64 = 5.0;

/// Calibrated decision thresholds.
///
/// `ultrasonic_base_in` is the clearance above which a point needs
/// maintenance, `severe_cutoff_in` the clearance above which it is a pothole,
/// and `accel_z_threshold` the vertical-acceleration level (raw counts) above
/// which the accelerometer reports a hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub ultrasonic_base_in: f64,
    pub severe_cutoff_in: f64,
    pub accel_z_threshold: f64,
    #[serde(default)]
    pub calibrated_at_ms: Option<i64>,
}

impl Default for Thresholds {
    /// The reference-road constants: 6 in baseline, 10 in severe, 1150 counts.
    fn default() -> Self {
        Thresholds {
            ultrasonic_base_in: 6.0,
            severe_cutoff_in: 10.0,
            accel_z_threshold: 1150.0,
            calibrated_at_ms: None,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let Thresholds {
            ultrasonic_base_in: base,
            severe_cutoff_in: cutoff,
            accel_z_threshold: accel,
            ..
        } = *self;
        if !(base.is_finite() && cutoff.is_finite() && accel.is_finite()) {
            return Err(Error::InvalidThresholds("values must be finite".into()));
        }
        if !(0.0 < base && base < cutoff) {
            return Err(Error::InvalidThresholds(format!(
                "need 0 < ultrasonic_base_in ({base}) < severe_cutoff_in ({cutoff})"
            )));
        }
        if accel <= 0.0 {
            return Err(Error::InvalidThresholds(format!(
                "accel_z_threshold must be > 0, got {accel}"
            )));
        }
        Ok(())
    }
}

fn mean_and_stddev(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Derives thresholds from a drive over a well-maintained road using
/// `mean + k_sigma * stddev` for each channel and the default severe span.
pub fn calibrate(readings: &[SensorReading], k_sigma: f64) -> Result<Thresholds> {
    calibrate_with(readings, k_sigma, DEFAULT_SEVERE_DELTA_IN)
}

/// Like [`calibrate`] with an explicit distance between the maintenance
/// baseline and the severe cutoff.
///
/// Standard deviations are sample (n - 1) estimates. `calibrated_at_ms` is the
/// timestamp of the newest reading, so the result depends only on the input.
pub fn calibrate_with(
    readings: &[SensorReading],
    k_sigma: f64,
    severe_delta_in: f64,
) -> Result<Thresholds> {
    if readings.len() < MIN_CALIBRATION_READINGS {
        return Err(Error::TooFewReadings {
            min: MIN_CALIBRATION_READINGS,
            got: readings.len(),
        });
    }
    if !(k_sigma.is_finite() && k_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("k_sigma {k_sigma}")));
    }
    if !(severe_delta_in.is_finite() && severe_delta_in > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "severe_delta_in {severe_delta_in}"
        )));
    }

    let (u_mean, u_sd) = mean_and_stddev(readings.iter().map(|r| r.ultrasonic_in));
    let (a_mean, a_sd) = mean_and_stddev(readings.iter().map(|r| r.accel_z));
    let base = u_mean + k_sigma * u_sd;
    let t = Thresholds {
        ultrasonic_base_in: base,
        severe_cutoff_in: base + severe_delta_in,
        accel_z_threshold: a_mean + k_sigma * a_sd,
        calibrated_at_ms: readings.iter().map(|r| r.ts_ms).max(),
    };
    t.validate()?;
    Ok(t)
}
