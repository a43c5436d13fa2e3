use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use podas_cli::commands::{self, AgentArgs, EventSource, SimulateArgs};
use podas_cli::{files, DemoOptions, UsageError};
use podas_core::roadsim::{NoiseModel, RoadParams, VehicleConfig};
use podas_core::scenario::{ConnectivityProfile, ScenarioConfig};
use podas_core::{GeoPoint, Severity};
use podas_server::{BBox, PotholeFilter, ServerConfig, StoreConfig};

#[derive(Parser)]
#[command(
    name = "podas",
    version,
    about = "Pothole detection pipeline: simulate, calibrate, upload, serve, evaluate"
)]
struct Cli {
    /// Log verbosity on stderr (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn", env = "PODAS_LOG")]
    log: tracing::Level,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a road profile and the trace a vehicle records on it.
    Simulate {
        #[arg(long, default_value_t = 1000.0)]
        length_m: f64,
        #[arg(long, default_value_t = 25)]
        potholes: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "profile.jsonl")]
        out_profile: PathBuf,
        #[arg(long, default_value = "trace.jsonl")]
        out_trace: PathBuf,
        /// Also write the pothole centers, one point per line.
        #[arg(long)]
        out_truth: Option<PathBuf>,
        #[arg(long, default_value_t = 3.0)]
        depth_min_in: f64,
        #[arg(long, default_value_t = 8.0)]
        depth_max_in: f64,
        #[arg(long, default_value_t = 0.5)]
        hole_min_m: f64,
        #[arg(long, default_value_t = 3.0)]
        hole_max_m: f64,
        #[arg(long, default_value_t = 13.35)]
        origin_lat: f64,
        #[arg(long, default_value_t = 74.78)]
        origin_lon: f64,
        #[arg(long, default_value_t = 90.0)]
        bearing_deg: f64,
        #[arg(long, default_value = "vehicle-01")]
        node_id: String,
        #[arg(long, default_value_t = 1_700_000_000_000)]
        t0_ms: i64,
    },
    /// Derive thresholds from a trace recorded on a pothole-free road.
    Calibrate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = podas_core::detection::DEFAULT_K_SIGMA)]
        k_sigma: f64,
        #[arg(long, default_value_t = podas_core::detection::DEFAULT_SEVERE_DELTA_IN)]
        severe_delta_in: f64,
        #[arg(long, default_value = "thresholds.json")]
        out: PathBuf,
    },
    /// Classify and cluster a trace offline.
    Detect {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        thresholds: PathBuf,
        #[arg(long, default_value_t = podas_core::detection::DEFAULT_CLUSTER_RADIUS_M)]
        radius: f64,
        #[arg(long, default_value = "events.jsonl")]
        out: PathBuf,
    },
    /// Score detected events against ground truth.
    Evaluate {
        /// Events as JSON lines or a GeoJSON FeatureCollection.
        #[arg(long)]
        events: PathBuf,
        /// Pothole centers as JSON lines, or a profile file.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
        #[arg(long)]
        json: bool,
    },
    /// Replay a trace through the store-and-forward agent into a server.
    Agent {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_parser = parse_profile)]
        profile: ConnectivityProfile,
        #[arg(long, env = "PODAS_SERVER")]
        server: String,
        #[arg(long, default_value_t = 50)]
        batch_cap: usize,
        #[arg(long, default_value_t = 100)]
        mem_cap: usize,
        /// Durable queue directory; a rerun resumes whatever is left there.
        #[arg(long, default_value = "podas-queue")]
        queue_dir: PathBuf,
        /// Pace the replay on the wall clock instead of the simulated one.
        #[arg(long)]
        realtime: bool,
        #[arg(long)]
        json: bool,
    },
    /// Run the ingestion server.
    Serve {
        #[arg(long, env = "PODAS_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "PODAS_DATA_DIR", default_value = "podas-data")]
        data_dir: PathBuf,
        /// Thresholds installed when the data directory is new.
        #[arg(long, env = "PODAS_THRESHOLDS")]
        thresholds: Option<PathBuf>,
        #[arg(long, default_value_t = podas_core::detection::DEFAULT_CLUSTER_RADIUS_M)]
        cluster_radius: f64,
        /// Static dashboard bundle served under /ui/.
        #[arg(long, env = "PODAS_UI_DIR")]
        ui_dir: Option<PathBuf>,
    },
    /// Write detected events as GeoJSON or JSON lines.
    Export {
        #[arg(long, value_enum, default_value_t = Format::Geojson)]
        format: Format,
        #[arg(long, conflicts_with_all = ["data_dir", "server"])]
        events: Option<PathBuf>,
        #[arg(long, conflicts_with = "server")]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        server: Option<String>,
        /// min_lon,min_lat,max_lon,max_lat
        #[arg(long)]
        bbox: Option<String>,
        #[arg(long)]
        since_ms: Option<i64>,
        #[arg(long)]
        min_severity: Option<String>,
        /// Standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario end to end and report detection quality.
    Demo {
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
        /// Defaults to `<scenario name>.events.geojson`.
        #[arg(long)]
        out_geojson: Option<PathBuf>,
        #[arg(long)]
        work_dir: Option<PathBuf>,
        #[arg(long)]
        no_fsync: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Geojson,
    Jsonl,
}

fn parse_profile(s: &str) -> Result<ConnectivityProfile, String> {
    s.parse().map_err(|e: podas_core::Error| e.to_string())
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            length_m,
            potholes,
            seed,
            out_profile,
            out_trace,
            out_truth,
            depth_min_in,
            depth_max_in,
            hole_min_m,
            hole_max_m,
            origin_lat,
            origin_lon,
            bearing_deg,
            node_id,
            t0_ms,
        } => {
            let origin = GeoPoint::new(origin_lat, origin_lon).map_err(|e| usage(e.to_string()))?;
            let args = SimulateArgs {
                road: RoadParams {
                    length_m,
                    n_potholes: potholes,
                    depth_range_in: [depth_min_in, depth_max_in],
                    length_range_m: [hole_min_m, hole_max_m],
                    origin,
                    bearing_deg,
                },
                seed,
                vehicle: VehicleConfig::default(),
                noise: NoiseModel::default(),
                node_id,
                t0_ms,
            };
            let (profile, trace) =
                commands::simulate(&args).map_err(|e| usage(format!("{e:#}")))?;
            files::write_jsonl(&out_profile, std::slice::from_ref(&profile))?;
            files::write_jsonl(&out_trace, &trace)?;
            if let Some(p) = out_truth {
                files::write_jsonl(&p, &profile.ground_truth())?;
            }
            println!(
                "{} potholes on {} m -> {}; {} readings -> {}",
                profile.potholes.len(),
                profile.length_m,
                out_profile.display(),
                trace.len(),
                out_trace.display()
            );
        }
        Command::Calibrate {
            trace,
            k_sigma,
            severe_delta_in,
            out,
        } => {
            let t = commands::calibrate(&trace, k_sigma, severe_delta_in)?;
            files::write_json(&out, &t)?;
            print_json(&t)?;
        }
        Command::Detect {
            trace,
            thresholds,
            radius,
            out,
        } => {
            let events = commands::detect(&trace, &thresholds, radius)?;
            files::write_jsonl(&out, &events)?;
            println!("{} events -> {}", events.len(), out.display());
        }
        Command::Evaluate {
            events,
            truth,
            radius,
            json,
        } => {
            let ev = commands::evaluate(&events, &truth, radius)?;
            if json {
                print_json(&ev)?;
            } else {
                let r = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
                println!("events {}, truth {}", ev.n_events, ev.n_truth);
                println!(
                    "matched {}/{}, missed {}, spurious {}",
                    ev.metrics.matched, ev.n_truth, ev.metrics.missed, ev.metrics.spurious
                );
                println!(
                    "recall {}, precision {}",
                    r(ev.metrics.recall),
                    r(ev.metrics.precision)
                );
            }
        }
        Command::Agent {
            trace,
            profile,
            server,
            batch_cap,
            mem_cap,
            queue_dir,
            realtime,
            json,
        } => {
            if batch_cap == 0 || mem_cap == 0 {
                return Err(usage("--batch-cap and --mem-cap must be > 0"));
            }
            let report = commands::run_agent(&AgentArgs {
                trace,
                profile,
                server,
                batch_cap,
                mem_cap,
                queue_dir,
                realtime,
            })?;
            if json {
                print_json(&report)?;
            } else {
                println!(
                    "enqueued {}, acked {} in {} batches, quarantined {}, remaining {}, retries {}",
                    report.enqueued,
                    report.acked,
                    report.batches_acked,
                    report.quarantined,
                    report.remaining,
                    report.retries
                );
            }
            if report.remaining > 0 || report.quarantined > 0 {
                eprintln!(
                    "error: {} readings not delivered",
                    report.remaining + report.quarantined
                );
                return Ok(ExitCode::from(1));
            }
        }
        Command::Serve {
            listen,
            data_dir,
            thresholds,
            cluster_radius,
            ui_dir,
        } => {
            let mut store = StoreConfig::new(&data_dir);
            store.cluster_radius_m = cluster_radius;
            if let Some(p) = thresholds {
                store.initial_thresholds = files::read_thresholds(&p)?;
            }
            let cfg = ServerConfig {
                listen,
                store,
                ui_dir,
            };
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(cfg.listen)
                    .await
                    .with_context(|| format!("binding {}", cfg.listen))?;
                println!("listening on http://{}", listener.local_addr()?);
                std::io::stdout().flush()?;
                podas_server::serve_on(listener, cfg)
                    .await
                    .context("serving")
            })?;
        }
        Command::Export {
            format,
            events,
            data_dir,
            server,
            bbox,
            since_ms,
            min_severity,
            out,
        } => {
            let source = match (events, data_dir, server) {
                (Some(p), _, _) => EventSource::File(p),
                (_, Some(d), _) => EventSource::DataDir(d),
                (_, _, Some(s)) => EventSource::Server(s),
                _ => return Err(usage("one of --events, --data-dir or --server is required")),
            };
            let filter = PotholeFilter {
                bbox: bbox
                    .map(|s| s.parse::<BBox>())
                    .transpose()
                    .map_err(|e| usage(e.to_string()))?,
                since_ms,
                min_severity: min_severity
                    .map(|s| s.parse::<Severity>())
                    .transpose()
                    .map_err(|e| usage(e.to_string()))?,
            };
            let events = commands::load_events(&source, &filter)?;
            let text = match format {
                Format::Geojson => {
                    let mut s = serde_json::to_string_pretty(
                        &podas_server::geojson::feature_collection(&events),
                    )?;
                    s.push('\n');
                    s
                }
                Format::Jsonl => events
                    .iter()
                    .map(|e| serde_json::to_string(e).map(|l| l + "\n"))
                    .collect::<Result<String, _>>()?,
            };
            match out {
                Some(p) => {
                    std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?
                }
                None => print!("{text}"),
            }
        }
        Command::Demo {
            scenario,
            seed,
            json,
            out_geojson,
            work_dir,
            no_fsync,
        } => {
            let mut cfg = ScenarioConfig::load(&scenario)
                .with_context(|| format!("loading scenario {}", scenario.display()))?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            let outcome = podas_cli::run_demo(&cfg, &DemoOptions { work_dir, no_fsync })?;
            let geo_path = out_geojson
                .unwrap_or_else(|| PathBuf::from(format!("{}.events.geojson", cfg.name)));
            std::fs::write(&geo_path, &outcome.geojson)
                .with_context(|| format!("writing {}", geo_path.display()))?;
            if json {
                print_json(&outcome.report)?;
            } else {
                println!("{}", outcome.report);
                println!("events GeoJSON -> {}", geo_path.display());
            }
            if let Some(why) = &outcome.report.failure {
                eprintln!("error: {why}");
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(cli.log)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
