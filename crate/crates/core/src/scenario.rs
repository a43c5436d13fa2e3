//! End-to-end run description, shared by the CLI demo and the offline sweep.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::{
    self, calibrate_with, DetectionMetrics, PotholeEvent, Thresholds, DEFAULT_CLUSTER_RADIUS_M,
    DEFAULT_K_SIGMA, DEFAULT_SEVERE_DELTA_IN,
};
use crate::domain::{GeoPoint, SensorReading};
use crate::error::{Error, Result};
use crate::par::Mode;
use crate::roadsim::{self, NoiseModel, RoadParams, RoadProfile, VehicleConfig};

/// Named uplink availability pattern of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectivityProfile {
    /// Phone hotspot, online the whole drive.
    AlwaysOn,
    /// Offline while driving, uploads once back at the depot.
    Depot,
    /// Short periodic windows while driving plus a final upload.
    Pilot,
    /// Never online.
    AlwaysDown,
}

impl std::str::FromStr for ConnectivityProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "always_on" => Ok(Self::AlwaysOn),
            "depot" => Ok(Self::Depot),
            "pilot" => Ok(Self::Pilot),
            "always_down" => Ok(Self::AlwaysDown),
            other => Err(Error::InvalidParameter(format!(
                "unknown connectivity profile {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub length_m: f64,
    pub k_sigma: f64,
    pub severe_delta_in: f64,
    /// Sensor model on the reference road; the scenario noise when absent.
    pub noise: Option<NoiseModel>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            length_m: 500.0,
            k_sigma: DEFAULT_K_SIGMA,
            severe_delta_in: DEFAULT_SEVERE_DELTA_IN,
            noise: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ThresholdSource {
    /// Drive the reference road and calibrate.
    Calibrate,
    /// Load a thresholds document, relative to the scenario file.
    File {
        path: PathBuf,
    },
    Fixed {
        thresholds: Thresholds,
    },
}

fn default_node_id() -> String {
    "vehicle-01".into()
}
fn default_t0() -> i64 {
    1_700_000_000_000
}
fn default_batch_cap() -> usize {
    50
}
fn default_mem_cap() -> usize {
    100
}
fn default_cluster_radius() -> f64 {
    DEFAULT_CLUSTER_RADIUS_M
}
fn default_match_radius() -> f64 {
    10.0
}
fn default_recall_floor() -> f64 {
    0.8
}
fn default_thresholds() -> ThresholdSource {
    ThresholdSource::Calibrate
}
fn default_connectivity() -> ConnectivityProfile {
    ConnectivityProfile::AlwaysOn
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_node_id")]
    pub node_id: String,
    #[serde(default = "default_t0")]
    pub t0_ms: i64,
    pub road: RoadParams,
    #[serde(default)]
    pub vehicle: VehicleConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default = "default_thresholds")]
    pub thresholds: ThresholdSource,
    #[serde(default = "default_connectivity")]
    pub connectivity: ConnectivityProfile,
    #[serde(default = "default_batch_cap")]
    pub batch_cap: usize,
    #[serde(default = "default_mem_cap")]
    pub mem_cap: usize,
    #[serde(default = "default_cluster_radius")]
    pub cluster_radius_m: f64,
    #[serde(default = "default_match_radius")]
    pub match_radius_m: f64,
    #[serde(default = "default_recall_floor")]
    pub recall_floor: f64,
    /// Directory relative paths in the scenario are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Independent RNG streams derived from the scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPlan {
    pub road: u64,
    pub trace: u64,
    pub calibration: u64,
}

impl SeedPlan {
    pub fn from_seed(seed: u64) -> Self {
        const MIX: u64 = 0x9E37_79B9_7F4A_7C15;
        SeedPlan {
            road: seed,
            trace: seed.wrapping_mul(MIX) ^ 0x0074_7261_6365,
            calibration: seed.wrapping_add(1).wrapping_mul(MIX) ^ 0x0063_616c_6962,
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.noise.validate()?;
        if let Some(n) = &self.calibration.noise {
            n.validate()?;
        }
        if self.batch_cap == 0 || self.mem_cap == 0 {
            return Err(Error::InvalidParameter(
                "batch_cap and mem_cap must be > 0".into(),
            ));
        }
        for (name, v) in [
            ("cluster_radius_m", self.cluster_radius_m),
            ("match_radius_m", self.match_radius_m),
            ("calibration.length_m", self.calibration.length_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if let ThresholdSource::File { path } = &self.thresholds {
            let p = self.resolve(path);
            if !p.exists() {
                return Err(Error::InvalidParameter(format!(
                    "thresholds file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn seeds(&self) -> SeedPlan {
        SeedPlan::from_seed(self.seed)
    }

    pub fn profile(&self) -> Result<RoadProfile> {
        self.road.generate(self.seeds().road)
    }

    pub fn trace(&self, profile: &RoadProfile) -> Result<Vec<SensorReading>> {
        roadsim::sample_trace(
            profile,
            &self.vehicle,
            &self.noise,
            &self.node_id,
            self.t0_ms,
            self.seeds().trace,
        )
    }

    /// Trace recorded on the pothole-free reference road.
    pub fn reference_trace(&self) -> Result<Vec<SensorReading>> {
        let reference = roadsim::generate_profile(
            self.calibration.length_m,
            0,
            self.road.depth_range_in,
            self.road.length_range_m,
            self.road.origin,
            self.road.bearing_deg,
            self.seeds().calibration,
        )?;
        let noise = self.calibration.noise.unwrap_or(self.noise);
        roadsim::sample_trace(
            &reference,
            &self.vehicle,
            &noise,
            &format!("{}-ref", self.node_id),
            self.t0_ms - 86_400_000,
            self.seeds().calibration,
        )
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        match &self.thresholds {
            ThresholdSource::Calibrate => calibrate_with(
                &self.reference_trace()?,
                self.calibration.k_sigma,
                self.calibration.severe_delta_in,
            ),
            ThresholdSource::File { path } => {
                let text = std::fs::read_to_string(self.resolve(path))?;
                let t: Thresholds = serde_json::from_str(&text).map_err(|e| Error::Parse {
                    line: e.line(),
                    message: e.to_string(),
                })?;
                t.validate()?;
                Ok(t)
            }
            ThresholdSource::Fixed { thresholds } => {
                thresholds.validate()?;
                Ok(*thresholds)
            }
        }
    }

    /// Runs simulation, calibration, detection and scoring in-process without
    /// any transport in between.
    pub fn run_offline(&self) -> Result<OfflineRun> {
        let profile = self.profile()?;
        let trace = self.trace(&profile)?;
        let thresholds = self.thresholds()?;
        let events =
            detection::detect(&trace, &thresholds, self.cluster_radius_m, Mode::Sequential);
        let truth = profile.ground_truth();
        let metrics = detection::detection_metrics(&events, &truth, self.match_radius_m);
        Ok(OfflineRun {
            seed: self.seed,
            n_readings: trace.len(),
            thresholds,
            events,
            truth,
            metrics,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineRun {
    pub seed: u64,
    pub n_readings: usize,
    pub thresholds: Thresholds,
    pub events: Vec<PotholeEvent>,
    pub truth: Vec<GeoPoint>,
    pub metrics: DetectionMetrics,
}
