//! The end-to-end experiment: simulate a drive, calibrate, upload through the
//! agent into an in-process server, and score the detected events.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use podas_agent::{
    AgentConfig, ConnectivitySchedule, HttpUplink, QueueConfig, SessionReport, SimClock,
};
use podas_core::scenario::{ConnectivityProfile, ScenarioConfig, ThresholdSource};
use podas_core::{detection_metrics, PotholeEvent, Thresholds};
use podas_server::{ServerConfig, ServerHandle, StoreConfig};
use serde::Serialize;
use serde_json::json;

use crate::client::ApiClient;

#[derive(Debug, Clone, Default)]
pub struct DemoOptions {
    /// Where the server data and agent queue live; a temporary directory
    /// when unset.
    pub work_dir: Option<PathBuf>,
    /// Skip fsync in the server log and agent queue.
    pub no_fsync: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoReport {
    pub scenario: String,
    pub seed: u64,
    pub connectivity: ConnectivityProfile,
    pub road_length_m: f64,
    pub n_potholes: usize,
    pub n_readings: usize,
    pub delivered: usize,
    pub thresholds: Thresholds,
    pub n_events: usize,
    pub matched: usize,
    pub missed: usize,
    pub spurious: usize,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub recall_floor: f64,
    pub store_version: u64,
    pub session: SessionReport,
    pub passed: bool,
    /// Why the run failed, when it did.
    pub failure: Option<String>,
}

fn ratio(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

impl fmt::Display for DemoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.thresholds;
        writeln!(f, "scenario {} (seed {})", self.scenario, self.seed)?;
        writeln!(
            f,
            "road: {} m, {} potholes, {} readings",
            self.road_length_m, self.n_potholes, self.n_readings
        )?;
        writeln!(
            f,
            "thresholds: base {:.3} in, severe cutoff {:.3} in, accel {:.1}",
            t.ultrasonic_base_in, t.severe_cutoff_in, t.accel_z_threshold
        )?;
        writeln!(
            f,
            "uplink: {}, {} readings delivered of {} in {} batches ({} retries)",
            connectivity_name(self.connectivity),
            self.delivered,
            self.n_readings,
            self.session.batches_acked,
            self.session.retries
        )?;
        writeln!(f, "events: {}", self.n_events)?;
        writeln!(
            f,
            "matched {}/{}, missed {}, spurious {}",
            self.matched, self.n_potholes, self.missed, self.spurious
        )?;
        writeln!(
            f,
            "recall {}, precision {}",
            ratio(self.recall),
            ratio(self.precision)
        )?;
        match &self.failure {
            None => write!(f, "PASS (recall floor {:.3})", self.recall_floor),
            Some(why) => write!(f, "FAIL: {why}"),
        }
    }
}

fn connectivity_name(c: ConnectivityProfile) -> &'static str {
    match c {
        ConnectivityProfile::AlwaysOn => "always_on",
        ConnectivityProfile::Depot => "depot",
        ConnectivityProfile::Pilot => "pilot",
        ConnectivityProfile::AlwaysDown => "always_down",
    }
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub report: DemoReport,
    pub events: Vec<PotholeEvent>,
    /// The server's GeoJSON rendering of `events`, byte for byte.
    pub geojson: String,
}

pub fn run_demo(scenario: &ScenarioConfig, opts: &DemoOptions) -> Result<DemoOutcome> {
    scenario.validate().context("invalid scenario")?;
    let tmp;
    let work: &Path = match &opts.work_dir {
        Some(d) => d,
        None => {
            tmp = tempfile::tempdir().context("creating work directory")?;
            tmp.path()
        }
    };
    let server_dir = work.join("server");
    if server_dir.join(podas_server::store::LOG_FILE).exists() {
        bail!(
            "work directory {} already holds server data; use a fresh one",
            work.display()
        );
    }

    let profile = scenario.profile().context("generating road profile")?;
    let trace = scenario.trace(&profile).context("sampling trace")?;

    let mut store = StoreConfig::new(&server_dir);
    store.cluster_radius_m = scenario.cluster_radius_m;
    store.fsync = !opts.no_fsync;
    let server = ServerHandle::start(ServerConfig {
        listen: "127.0.0.1:0".parse().expect("literal address"),
        store,
        ui_dir: None,
    })
    .context("starting server")?;
    let api = ApiClient::new(&server.base_url());

    let thresholds: Thresholds = match &scenario.thresholds {
        ThresholdSource::Calibrate => {
            let reference = scenario
                .reference_trace()
                .context("sampling reference road")?;
            api.post(
                "/api/v1/calibrate",
                &json!({
                    "readings": reference,
                    "k_sigma": scenario.calibration.k_sigma,
                    "severe_delta_in": scenario.calibration.severe_delta_in,
                }),
            )
            .context("calibrating")?
        }
        _ => {
            let t = scenario.thresholds().context("loading thresholds")?;
            api.put("/api/v1/thresholds", &t)
                .context("installing thresholds")?
        }
    };

    let (start, end) = match (trace.first(), trace.last()) {
        (Some(a), Some(b)) => (a.ts_ms, b.ts_ms),
        _ => bail!("scenario produced an empty trace"),
    };
    let schedule = ConnectivitySchedule::for_profile(scenario.connectivity, start, end);
    let cfg = AgentConfig {
        batch_cap: scenario.batch_cap,
        queue: QueueConfig {
            mem_cap: scenario.mem_cap,
            fsync: !opts.no_fsync,
            ..QueueConfig::default()
        },
        ..AgentConfig::default()
    };
    let mut clock = SimClock::new(start);
    let (session, _) = podas_agent::run_session(
        work.join("agent"),
        &trace,
        &schedule,
        cfg,
        HttpUplink::new(api.base()),
        &mut clock,
    )
    .context("running agent session")?;

    let events: Vec<PotholeEvent> = api.get("/api/v1/potholes").context("querying events")?;
    let geojson = api
        .get_text("/api/v1/potholes.geojson")
        .context("exporting GeoJSON")?;
    let version: serde_json::Value = api.get("/api/v1/version")?;
    server.stop();

    let truth = profile.ground_truth();
    let m = detection_metrics(&events, &truth, scenario.match_radius_m);
    let delivered = session.acked;
    let failure = if delivered < trace.len() {
        Some(format!("{delivered} readings delivered of {}", trace.len()))
    } else {
        match m.recall {
            Some(r) if r < scenario.recall_floor => Some(format!(
                "recall {r:.3} below floor {:.3}",
                scenario.recall_floor
            )),
            _ => None,
        }
    };

    let report = DemoReport {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        connectivity: scenario.connectivity,
        road_length_m: profile.length_m,
        n_potholes: truth.len(),
        n_readings: trace.len(),
        delivered,
        thresholds,
        n_events: events.len(),
        matched: m.matched,
        missed: m.missed,
        spurious: m.spurious,
        recall: m.recall,
        precision: m.precision,
        recall_floor: scenario.recall_floor,
        store_version: version["version"].as_u64().unwrap_or(0),
        session,
        passed: failure.is_none(),
        failure,
    };
    Ok(DemoOutcome {
        report,
        events,
        geojson,
    })
}
