//! Thin wrappers behind the sequential subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use podas_agent::{
    AgentConfig, Clock, ConnectivitySchedule, HttpUplink, NodeAgent, QueueConfig, SessionReport,
    SimClock, WallClock,
};
use podas_core::detection::{self, calibrate_with, DetectionMetrics};
use podas_core::par::Mode;
use podas_core::roadsim::{self, NoiseModel, RoadParams, RoadProfile, VehicleConfig};
use podas_core::scenario::{ConnectivityProfile, SeedPlan};
use podas_core::{detection_metrics, GeoPoint, PotholeEvent, SensorReading, Thresholds};
use podas_server::{PotholeFilter, Store, StoreConfig};
use serde::Serialize;

use crate::client::ApiClient;
use crate::files;

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub road: RoadParams,
    pub seed: u64,
    pub vehicle: VehicleConfig,
    pub noise: NoiseModel,
    pub node_id: String,
    pub t0_ms: i64,
}

/// Same seed derivation as a scenario run, so `simulate --seed 42` writes the
/// trace `demo` would drive for seed 42.
pub fn simulate(args: &SimulateArgs) -> Result<(RoadProfile, Vec<SensorReading>)> {
    let seeds = SeedPlan::from_seed(args.seed);
    let profile = args.road.generate(seeds.road)?;
    let trace = roadsim::sample_trace(
        &profile,
        &args.vehicle,
        &args.noise,
        &args.node_id,
        args.t0_ms,
        seeds.trace,
    )?;
    Ok((profile, trace))
}

pub fn calibrate(trace: &Path, k_sigma: f64, severe_delta_in: f64) -> Result<Thresholds> {
    let readings = files::read_trace(trace)?;
    calibrate_with(&readings, k_sigma, severe_delta_in).context("calibrating")
}

pub fn detect(trace: &Path, thresholds: &Path, radius_m: f64) -> Result<Vec<PotholeEvent>> {
    let readings = files::read_trace(trace)?;
    let t = files::read_thresholds(thresholds)?;
    if !(radius_m.is_finite() && radius_m > 0.0) {
        bail!("radius must be > 0, got {radius_m}");
    }
    Ok(detection::detect(&readings, &t, radius_m, Mode::Auto))
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub n_events: usize,
    pub n_truth: usize,
    #[serde(flatten)]
    pub metrics: DetectionMetrics,
}

pub fn evaluate(events: &Path, truth: &Path, radius_m: f64) -> Result<Evaluation> {
    let events = files::read_events(events)?;
    let truth: Vec<GeoPoint> = files::read_truth(truth)?;
    Ok(Evaluation {
        n_events: events.len(),
        n_truth: truth.len(),
        metrics: detection_metrics(&events, &truth, radius_m),
    })
}

/// Where `export` takes its events from.
#[derive(Debug, Clone)]
pub enum EventSource {
    File(PathBuf),
    /// A server data directory, opened read-only in spirit: nothing is
    /// appended unless the log needs a torn tail trimmed.
    DataDir(PathBuf),
    Server(String),
}

pub fn load_events(source: &EventSource, filter: &PotholeFilter) -> Result<Vec<PotholeEvent>> {
    match source {
        EventSource::File(p) => Ok(filter.apply(&files::read_events(p)?)),
        EventSource::DataDir(dir) => {
            if !dir.join(podas_server::store::LOG_FILE).exists() {
                bail!("{} holds no server data", dir.display());
            }
            let store = Store::open(&StoreConfig::new(dir))
                .with_context(|| format!("opening store {}", dir.display()))?;
            Ok(store.get_potholes(filter))
        }
        EventSource::Server(url) => {
            let mut q = Vec::new();
            if let Some(b) = filter.bbox {
                q.push(format!(
                    "bbox={},{},{},{}",
                    b.min_lon, b.min_lat, b.max_lon, b.max_lat
                ));
            }
            if let Some(s) = filter.since_ms {
                q.push(format!("since_ms={s}"));
            }
            if let Some(s) = filter.min_severity {
                q.push(format!("min_severity={s}"));
            }
            let path = if q.is_empty() {
                "/api/v1/potholes".to_string()
            } else {
                format!("/api/v1/potholes?{}", q.join("&"))
            };
            ApiClient::new(url).get(&path)
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentArgs {
    pub trace: PathBuf,
    pub profile: ConnectivityProfile,
    pub server: String,
    pub batch_cap: usize,
    pub mem_cap: usize,
    pub queue_dir: PathBuf,
    pub realtime: bool,
}

pub fn run_agent(args: &AgentArgs) -> Result<SessionReport> {
    let trace = files::read_trace(&args.trace)?;
    let (first, last) = match (trace.first(), trace.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => bail!("trace {} is empty", args.trace.display()),
    };
    if let Some(r) = trace.iter().find(|r| r.node_id != first.node_id) {
        bail!(
            "trace mixes node ids {:?} and {:?}",
            first.node_id,
            r.node_id
        );
    }
    let schedule = ConnectivitySchedule::for_profile(args.profile, first.ts_ms, last.ts_ms);
    let cfg = AgentConfig {
        batch_cap: args.batch_cap,
        queue: QueueConfig {
            mem_cap: args.mem_cap,
            ..QueueConfig::default()
        },
        ..AgentConfig::default()
    };
    let mut agent = NodeAgent::open(
        &args.queue_dir,
        &first.node_id,
        cfg,
        HttpUplink::new(&args.server),
    )?;
    let report = if args.realtime {
        drive(
            &mut agent,
            &trace,
            &schedule,
            &mut WallClock::new(first.ts_ms),
        )?
    } else {
        drive(
            &mut agent,
            &trace,
            &schedule,
            &mut SimClock::new(first.ts_ms),
        )?
    };
    Ok(report)
}

fn drive<C: Clock>(
    agent: &mut NodeAgent<HttpUplink>,
    trace: &[SensorReading],
    schedule: &ConnectivitySchedule,
    clock: &mut C,
) -> Result<SessionReport> {
    Ok(agent.run_session(trace, schedule, clock)?)
}
