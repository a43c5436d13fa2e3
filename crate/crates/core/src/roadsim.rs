//! Deterministic synthetic roads and the sensor traces a vehicle would record
//! driving them.
//!
//! Sampling is distance-triggered: one reading every `sample_spacing_m`
//! meters starting at x = 0. The ultrasonic sensor sees the road only at the
//! sample position, while the accelerometer reports the harshest jolt over the
//! stretch of road the sample stands for (the half-spacing on either side,
//! with the first and last samples extended to the road ends). A hole that
//! sits between two sample points is therefore invisible to the ultrasonic
//! channel and can only be caught by the accelerometer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{GeoPoint, SensorReading};
use crate::error::{Error, Result};

/// Attempts per pothole before placement is declared infeasible.
const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Slack absorbed when turning `length / spacing` into a sample count, so a
/// spacing of exactly `1000 / 150` yields 150 samples rather than 151.
const COUNT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotholeSpec {
    pub start_m: f64,
    pub length_m: f64,
    pub depth_in: f64,
}

impl PotholeSpec {
    pub fn end_m(&self) -> f64 {
        self.start_m + self.length_m
    }

    pub fn center_m(&self) -> f64 {
        self.start_m + self.length_m / 2.0
    }

    /// Half-open containment test on `[start_m, start_m + length_m)`.
    pub fn contains(&self, x_m: f64) -> bool {
        x_m >= self.start_m && x_m < self.end_m()
    }

    fn overlaps(&self, lo: f64, hi: f64) -> bool {
        self.start_m < hi && lo < self.end_m()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadProfile {
    pub length_m: f64,
    pub origin: GeoPoint,
    pub bearing_deg: f64,
    pub potholes: Vec<PotholeSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleConfig {
    pub ride_height_in: f64,
    pub speed_mps: f64,
    pub sample_spacing_m: f64,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        VehicleConfig {
            ride_height_in: 6.0,
            speed_mps: 8.0,
            sample_spacing_m: 1000.0 / 150.0,
        }
    }
}

impl VehicleConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ride_height_in", self.ride_height_in),
            ("speed_mps", self.speed_mps),
            ("sample_spacing_m", self.sample_spacing_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Additive Gaussian sensor noise plus a linear accelerometer response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub sigma_ultra_in: f64,
    pub sigma_accel: f64,
    pub accel_base: f64,
    /// Counts per (inch of depth x m/s of speed).
    pub accel_gain: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma_ultra_in: 0.25,
            sigma_accel: 40.0,
            accel_base: 950.0,
            accel_gain: 25.0,
        }
    }
}

impl NoiseModel {
    /// Default response with both noise terms switched off.
    pub fn noiseless() -> Self {
        NoiseModel {
            sigma_ultra_in: 0.0,
            sigma_accel: 0.0,
            ..NoiseModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_ultra_in", self.sigma_ultra_in),
            ("sigma_accel", self.sigma_accel),
            ("accel_base", self.accel_base),
            ("accel_gain", self.accel_gain),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Parameters of [`generate_profile`], grouped so scenario files can carry
/// them verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadParams {
    pub length_m: f64,
    pub n_potholes: usize,
    pub depth_range_in: [f64; 2],
    pub length_range_m: [f64; 2],
    pub origin: GeoPoint,
    pub bearing_deg: f64,
}

impl RoadParams {
    pub fn generate(&self, seed: u64) -> Result<RoadProfile> {
        generate_profile(
            self.length_m,
            self.n_potholes,
            self.depth_range_in,
            self.length_range_m,
            self.origin,
            self.bearing_deg,
            seed,
        )
    }
}

fn check_range(name: &str, [lo, hi]: [f64; 2]) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} [{lo}, {hi}] must satisfy 0 < min <= max"
        )))
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Places `n_potholes` disjoint holes on a straight road by seeded rejection
/// sampling. Holes lie entirely inside `[0, length_m)` and are returned
/// sorted by start.
pub fn generate_profile(
    length_m: f64,
    n_potholes: usize,
    depth_range_in: [f64; 2],
    length_range_m: [f64; 2],
    origin: GeoPoint,
    bearing_deg: f64,
    seed: u64,
) -> Result<RoadProfile> {
    if !(length_m.is_finite() && length_m > 0.0) {
        return Err(Error::InvalidParameter(format!("road length {length_m}")));
    }
    if !origin.is_valid() {
        return Err(Error::InvalidCoordinate {
            lat: origin.lat,
            lon: origin.lon,
        });
    }
    if !bearing_deg.is_finite() {
        return Err(Error::InvalidParameter(format!("bearing {bearing_deg}")));
    }
    check_range("depth_range_in", depth_range_in)?;
    check_range("length_range_m", length_range_m)?;
    if n_potholes as f64 * length_range_m[1] > length_m / 2.0 {
        return Err(Error::InfeasiblePlacement {
            requested: n_potholes,
            length_m,
            attempts: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holes: Vec<PotholeSpec> = Vec::with_capacity(n_potholes);
    for _ in 0..n_potholes {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let len = uniform(&mut rng, length_range_m);
            let start = rng.random_range(0.0..(length_m - len));
            let depth = uniform(&mut rng, depth_range_in);
            let cand = PotholeSpec {
                start_m: start,
                length_m: len,
                depth_in: depth,
            };
            if holes
                .iter()
                .all(|h| !h.overlaps(cand.start_m, cand.end_m()))
            {
                holes.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InfeasiblePlacement {
                requested: n_potholes,
                length_m,
                attempts: PLACEMENT_ATTEMPTS,
            });
        }
    }
    holes.sort_by(|a, b| a.start_m.total_cmp(&b.start_m));

    Ok(RoadProfile {
        length_m,
        origin,
        bearing_deg,
        potholes: holes,
        seed,
    })
}

impl RoadProfile {
    /// Depth of the hole covering `x_m`, or 0.0 on smooth road.
    pub fn depth_at(&self, x_m: f64) -> Result<f64> {
        if !(x_m >= 0.0 && x_m < self.length_m) {
            return Err(Error::OutOfRange {
                x_m,
                length_m: self.length_m,
            });
        }
        // Last hole starting at or before x.
        let idx = self.potholes.partition_point(|h| h.start_m <= x_m);
        Ok(match idx.checked_sub(1).map(|i| &self.potholes[i]) {
            Some(h) if h.contains(x_m) => h.depth_in,
            _ => 0.0,
        })
    }

    /// Deepest hole overlapping `[lo, hi)`, or 0.0.
    pub fn max_depth_between(&self, lo: f64, hi: f64) -> f64 {
        let first = self.potholes.partition_point(|h| h.end_m() <= lo);
        self.potholes[first..]
            .iter()
            .take_while(|h| h.start_m < hi)
            .filter(|h| h.overlaps(lo, hi))
            .map(|h| h.depth_in)
            .fold(0.0, f64::max)
    }

    /// Position `x_m` meters down the road.
    pub fn point_at(&self, x_m: f64) -> GeoPoint {
        self.origin.offset(self.bearing_deg, x_m)
    }

    /// Number of samples a vehicle with the given spacing records.
    pub fn sample_count(&self, spacing_m: f64) -> usize {
        ((self.length_m / spacing_m) - COUNT_EPSILON)
            .ceil()
            .max(0.0) as usize
    }

    /// One centroid per pothole, projected onto the route.
    pub fn ground_truth(&self) -> Vec<GeoPoint> {
        self.potholes
            .iter()
            .map(|h| self.point_at(h.center_m()))
            .collect()
    }
}

pub fn depth_at(profile: &RoadProfile, x_m: f64) -> Result<f64> {
    profile.depth_at(x_m)
}

pub fn export_ground_truth(profile: &RoadProfile) -> Vec<GeoPoint> {
    profile.ground_truth()
}

/// Synthesizes the readings a vehicle records while driving `profile`.
pub fn sample_trace(
    profile: &RoadProfile,
    vehicle: &VehicleConfig,
    noise: &NoiseModel,
    node_id: &str,
    t0_ms: i64,
    seed: u64,
) -> Result<Vec<SensorReading>> {
    vehicle.validate()?;
    noise.validate()?;

    let spacing = vehicle.sample_spacing_m;
    let n = profile.sample_count(spacing);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ultra_noise = Normal::new(0.0, noise.sigma_ultra_in)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let accel_noise =
        Normal::new(0.0, noise.sigma_accel).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x = i as f64 * spacing;
        let lo = if i == 0 { 0.0 } else { x - spacing / 2.0 };
        let hi = if i + 1 == n {
            profile.length_m
        } else {
            x + spacing / 2.0
        };

        let depth = profile.depth_at(x)?;
        let jolt_depth = profile.max_depth_between(lo, hi);

        let ultrasonic = vehicle.ride_height_in + depth + ultra_noise.sample(&mut rng);
        let accel = noise.accel_base
            + noise.accel_gain * jolt_depth * vehicle.speed_mps
            + accel_noise.sample(&mut rng);

        out.push(SensorReading {
            node_id: node_id.to_string(),
            seq: i as u64,
            ts_ms: t0_ms + (1000.0 * x / vehicle.speed_mps).round() as i64,
            pos: profile.point_at(x),
            ultrasonic_in: ultrasonic.max(0.0),
            accel_z: accel.max(0.0),
        });
    }
    Ok(out)
}
