//! Shared vocabulary types and spherical-earth helpers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used for every distance computation, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// WGS-84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(Error::InvalidCoordinate { lat, lon })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }

    /// Moves `distance_m` meters from `self` along `bearing_deg` (clockwise
    /// from north) on a local equirectangular plane.
    pub fn offset(&self, bearing_deg: f64, distance_m: f64) -> GeoPoint {
        let bearing = bearing_deg.to_radians();
        let north = distance_m * bearing.cos();
        let east = distance_m * bearing.sin();
        let dlat = (north / EARTH_RADIUS_M).to_degrees();
        let dlon = (east / (EARTH_RADIUS_M * self.lat.to_radians().cos())).to_degrees();
        GeoPoint {
            lat: self.lat + dlat,
            lon: self.lon + dlon,
        }
    }
}

/// Great-circle distance in meters between two valid points.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// One timestamped, geotagged sample from a vehicle's sensor module.
///
/// On disk and on the wire the position is flattened into `lat`/`lon` keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub node_id: String,
    pub seq: u64,
    pub ts_ms: i64,
    #[serde(flatten)]
    pub pos: GeoPoint,
    pub ultrasonic_in: f64,
    pub accel_z: f64,
}

impl SensorReading {
    /// Checks coordinate ranges and that both sensor values are finite and
    /// non-negative.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidReading {
            node_id: self.node_id.clone(),
            seq: self.seq,
            reason,
        };
        if !self.pos.is_valid() {
            return Err(fail(format!(
                "coordinate out of range ({}, {})",
                self.pos.lat, self.pos.lon
            )));
        }
        if !(self.ultrasonic_in.is_finite() && self.ultrasonic_in >= 0.0) {
            return Err(fail(format!("ultrasonic_in = {}", self.ultrasonic_in)));
        }
        if !(self.accel_z.is_finite() && self.accel_z >= 0.0) {
            return Err(fail(format!("accel_z = {}", self.accel_z)));
        }
        Ok(())
    }

    pub fn key(&self) -> (String, u64) {
        (self.node_id.clone(), self.seq)
    }
}

/// Road-condition grade of a point or event.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub enum Severity {
    #[default]
    Normal,
    MaintenanceNeeded,
    Pothole,
}

impl Severity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Normal => "Normal",
            Severity::MaintenanceNeeded => "MaintenanceNeeded",
            Severity::Pothole => "Pothole",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Normal" | "normal" => Ok(Severity::Normal),
            "MaintenanceNeeded" | "maintenance_needed" | "maintenance" => {
                Ok(Severity::MaintenanceNeeded)
            }
            "Pothole" | "pothole" => Ok(Severity::Pothole),
            other => Err(Error::InvalidParameter(format!(
                "unknown severity {other:?}"
            ))),
        }
    }
}
