//! Durable reading and event stores behind one write-ahead log.
//!
//! Every state change is a single JSON line in `podas.log`: the clustering
//! configuration, a threshold change, or the new readings of one batch. A
//! batch record is written and synced before its readings become visible, so a
//! batch is either fully committed or absent. On startup the log is replayed
//! in order; because classification and clustering are deterministic, replay
//! rebuilds the exact event set, ids included.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use podas_core::detection::{calibrate_with, classify_point, Clusterer};
use podas_core::{IngestAck, PotholeEvent, ReadingBatch, SensorReading, Thresholds, WireReading};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ServerError;
use crate::query::{bucket_counts, Bucket, PotholeFilter, StatsBucket};

pub const LOG_FILE: &str = "podas.log";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogRecord {
    Config {
        cluster_radius_m: f64,
    },
    Thresholds {
        thresholds: Thresholds,
    },
    Batch {
        node_id: String,
        batch_seq: u64,
        readings: Vec<WireReading>,
    },
}

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub data_dir: PathBuf,
    /// Installed only when the store is created; a persisted set wins.
    pub initial_thresholds: Thresholds,
    /// Used only when the store is created; the logged radius wins.
    pub cluster_radius_m: f64,
    pub fsync: bool,
}

impl StoreConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        StoreConfig {
            data_dir: data_dir.into(),
            initial_thresholds: Thresholds::default(),
            cluster_radius_m: podas_core::detection::DEFAULT_CLUSTER_RADIUS_M,
            fsync: true,
        }
    }
}

pub struct Store {
    log: File,
    log_len: u64,
    fsync: bool,
    readings: BTreeMap<(String, u64), SensorReading>,
    clusterer: Clusterer,
    thresholds: Thresholds,
    version: u64,
}

impl Store {
    pub fn open(cfg: &StoreConfig) -> Result<Self, ServerError> {
        fs::create_dir_all(&cfg.data_dir)?;
        let path = cfg.data_dir.join(LOG_FILE);
        let log = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)?;
        let mut store = Store {
            log,
            log_len: 0,
            fsync: cfg.fsync,
            readings: BTreeMap::new(),
            clusterer: Clusterer::new(cfg.cluster_radius_m),
            thresholds: cfg.initial_thresholds,
            version: 0,
        };
        let replayed = store.replay(&path)?;
        if replayed == 0 {
            cfg.initial_thresholds
                .validate()
                .map_err(|e| ServerError::unprocessable(e.to_string()))?;
            store.commit(&LogRecord::Config {
                cluster_radius_m: cfg.cluster_radius_m,
            })?;
            store.commit(&LogRecord::Thresholds {
                thresholds: cfg.initial_thresholds,
            })?;
        } else {
            tracing::info!(
                records = replayed,
                readings = store.readings.len(),
                events = store.events().len(),
                "replayed log"
            );
        }
        Ok(store)
    }

    fn replay(&mut self, path: &Path) -> Result<usize, ServerError> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut offset = 0u64;
        let mut count = 0;
        let mut line = String::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            if !line.ends_with('\n') {
                // Torn write from a crash mid-commit: the batch was never acknowledged.
                tracing::warn!(offset, "truncating torn record at end of log");
                self.log.set_len(offset)?;
                break;
            }
            let rec: LogRecord = serde_json::from_str(line.trim_end()).map_err(|e| {
                ServerError::Corrupt(format!("record {} at byte {offset}: {e}", count + 1))
            })?;
            self.apply(rec);
            offset += n as u64;
            count += 1;
        }
        self.log_len = offset;
        Ok(count)
    }

    fn apply(&mut self, rec: LogRecord) {
        match rec {
            LogRecord::Config { cluster_radius_m } => {
                self.clusterer = Clusterer::new(cluster_radius_m);
            }
            LogRecord::Thresholds { thresholds } => self.thresholds = thresholds,
            LogRecord::Batch {
                node_id,
                batch_seq,
                readings,
            } => {
                let batch = ReadingBatch {
                    node_id,
                    batch_seq,
                    readings,
                };
                for r in batch.to_readings() {
                    let label = classify_point(&r, &self.thresholds);
                    self.clusterer.insert(&r, &label);
                    self.readings.insert(r.key(), r);
                }
            }
        }
        self.version += 1;
    }

    /// Appends and syncs one record, then applies it. On a failed write the
    /// log is cut back so no partial record survives.
    fn commit(&mut self, rec: &LogRecord) -> Result<(), ServerError> {
        let mut line = serde_json::to_vec(rec).map_err(std::io::Error::from)?;
        line.push(b'\n');
        let written = self.log.write_all(&line).and_then(|_| {
            if self.fsync {
                self.log.sync_data()
            } else {
                Ok(())
            }
        });
        if let Err(e) = written {
            let _ = self.log.set_len(self.log_len);
            return Err(e.into());
        }
        self.log_len += line.len() as u64;
        self.apply(rec.clone());
        Ok(())
    }

    /// Persists the readings of `batch` not already stored and merges them into
    /// the event set. All-or-nothing: an invalid reading rejects the batch.
    pub fn ingest_batch(&mut self, batch: &ReadingBatch) -> Result<IngestAck, ServerError> {
        if batch.node_id.is_empty() {
            return Err(ServerError::unprocessable("node_id must not be empty"));
        }
        if batch.is_empty() {
            return Err(ServerError::unprocessable("batch carries no readings"));
        }
        let offending = batch.offending_seqs();
        if !offending.is_empty() {
            return Err(ServerError::Unprocessable {
                message: format!("{} readings out of range", offending.len()),
                offending_seqs: offending,
            });
        }

        let mut seen = HashSet::new();
        let mut fresh = Vec::new();
        for w in &batch.readings {
            let key = (batch.node_id.clone(), w.seq);
            if !self.readings.contains_key(&key) && seen.insert(w.seq) {
                fresh.push(w.clone());
            }
        }
        let ack = IngestAck {
            accepted: fresh.len(),
            duplicates: batch.len() - fresh.len(),
        };
        if !fresh.is_empty() {
            self.commit(&LogRecord::Batch {
                node_id: batch.node_id.clone(),
                batch_seq: batch.batch_seq,
                readings: fresh,
            })?;
        }
        Ok(ack)
    }

    /// Installs new thresholds for subsequent ingests. Existing events keep
    /// the labels they were built with.
    pub fn put_thresholds(&mut self, t: Thresholds) -> Result<(), ServerError> {
        t.validate()
            .map_err(|e| ServerError::unprocessable(e.to_string()))?;
        self.commit(&LogRecord::Thresholds { thresholds: t })
    }

    pub fn calibrate(
        &mut self,
        readings: &[SensorReading],
        k_sigma: f64,
        severe_delta_in: f64,
    ) -> Result<Thresholds, ServerError> {
        let t = calibrate_with(readings, k_sigma, severe_delta_in)
            .map_err(|e| ServerError::unprocessable(e.to_string()))?;
        self.put_thresholds(t)?;
        Ok(t)
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn cluster_radius_m(&self) -> f64 {
        self.clusterer.radius_m()
    }

    pub fn reading_count(&self) -> usize {
        self.readings.len()
    }

    pub fn readings(&self) -> impl Iterator<Item = &SensorReading> {
        self.readings.values()
    }

    pub fn contains(&self, node_id: &str, seq: u64) -> bool {
        self.readings.contains_key(&(node_id.to_string(), seq))
    }

    pub fn events(&self) -> &[PotholeEvent] {
        self.clusterer.events()
    }

    pub fn get_potholes(&self, filter: &PotholeFilter) -> Vec<PotholeEvent> {
        filter.apply(self.events())
    }

    pub fn stats(
        &self,
        bucket: Bucket,
        since_ms: Option<i64>,
    ) -> Result<Vec<StatsBucket>, ServerError> {
        bucket_counts(
            self.events().iter().map(|e| e.first_seen_ms),
            self.readings.values().map(|r| r.ts_ms),
            bucket,
            since_ms,
        )
    }

    /// SHA-256 over the canonical JSON of every stored reading (key order) and
    /// every event (creation order). Equal digests mean equal store contents.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for r in self.readings.values() {
            h.update(serde_json::to_vec(r).expect("reading serializes"));
            h.update(b"\n");
        }
        h.update(b"--events--\n");
        for e in self.events() {
            h.update(serde_json::to_vec(e).expect("event serializes"));
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}
