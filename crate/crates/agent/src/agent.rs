//! The vehicle-side store-and-forward loop.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use podas_core::{IngestAck, ReadingBatch, SensorReading};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::error::{AgentError, Result};
use crate::queue::{CacheQueue, QueueConfig};
use crate::schedule::ConnectivitySchedule;
use crate::uplink::{Uplink, UplinkError};

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub batch_cap: usize,
    pub backoff_initial_ms: i64,
    pub backoff_max_ms: i64,
    /// Periodic flush cadence while connected.
    pub tick_ms: i64,
    pub queue: QueueConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            batch_cap: 50,
            backoff_initial_ms: 500,
            backoff_max_ms: 30_000,
            tick_ms: 5_000,
            queue: QueueConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeliveryResult {
    Acked {
        batch_seq: u64,
        readings: usize,
        ack: IngestAck,
    },
    Retrying {
        batch_seq: u64,
        error: String,
        next_attempt_ms: i64,
    },
    Quarantined {
        batch_seq: u64,
        readings: usize,
        status: u16,
    },
}

/// Counters for one agent process lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SessionReport {
    pub enqueued: usize,
    /// Readings carried by send attempts, retransmissions included.
    pub sent: usize,
    /// Readings sent before the last trace reading was enqueued.
    pub sent_while_driving: usize,
    pub acked: usize,
    pub quarantined: usize,
    pub remaining: usize,
    /// Readings that were already queued when the agent started.
    pub recovered: usize,
    pub batches_acked: usize,
    pub retries: usize,
    /// Largest gap between a reading's timestamp and its acknowledgment.
    pub max_latency_ms: i64,
}

impl SessionReport {
    /// `recovered + enqueued = acked + quarantined + remaining`.
    pub fn is_conserved(&self) -> bool {
        self.recovered + self.enqueued == self.acked + self.quarantined + self.remaining
    }
}

#[derive(Serialize)]
struct DeadLetter<'a> {
    status: u16,
    body: &'a str,
    batch: &'a ReadingBatch,
}

pub struct NodeAgent<U> {
    node_id: String,
    cfg: AgentConfig,
    queue: CacheQueue,
    uplink: U,
    dead_letter_path: PathBuf,
    backoff_ms: i64,
    next_attempt_ms: i64,
    next_tick_ms: Option<i64>,
    report: SessionReport,
}

impl<U: Uplink> NodeAgent<U> {
    /// Opens the agent's durable state under `dir`, recovering any queue left
    /// behind by an earlier run.
    pub fn open(dir: impl AsRef<Path>, node_id: &str, cfg: AgentConfig, uplink: U) -> Result<Self> {
        if cfg.batch_cap == 0 {
            return Err(AgentError::Config("batch_cap must be > 0".into()));
        }
        let dir = dir.as_ref();
        let queue = CacheQueue::open(dir, node_id, cfg.queue.clone())?;
        let dead_letter_path = queue.log_path().with_file_name(format!(
            "{}.deadletter.jsonl",
            queue
                .log_path()
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".spill.jsonl"))
                .unwrap_or("agent")
        ));
        let report = SessionReport {
            recovered: queue.len(),
            remaining: queue.len(),
            ..SessionReport::default()
        };
        Ok(NodeAgent {
            node_id: node_id.to_string(),
            backoff_ms: cfg.backoff_initial_ms,
            cfg,
            queue,
            uplink,
            dead_letter_path,
            next_attempt_ms: i64::MIN,
            next_tick_ms: None,
            report,
        })
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn queue(&self) -> &CacheQueue {
        &self.queue
    }

    pub fn uplink(&self) -> &U {
        &self.uplink
    }

    pub fn uplink_mut(&mut self) -> &mut U {
        &mut self.uplink
    }

    pub fn report(&self) -> SessionReport {
        SessionReport {
            remaining: self.queue.len(),
            ..self.report
        }
    }

    pub fn dead_letter_path(&self) -> &Path {
        &self.dead_letter_path
    }

    pub fn enqueue(&mut self, reading: SensorReading) -> Result<()> {
        if reading.node_id != self.node_id {
            return Err(AgentError::ForeignReading {
                expected: self.node_id.clone(),
                got: reading.node_id,
            });
        }
        self.queue.enqueue(reading)?;
        self.report.enqueued += 1;
        Ok(())
    }

    /// Sends batches while the link is up at `now_ms` and the queue is
    /// nonempty. A transport failure schedules a retry of the same batch after
    /// an exponentially growing backoff and ends this flush.
    pub fn flush(
        &mut self,
        now_ms: i64,
        schedule: &ConnectivitySchedule,
    ) -> Result<Vec<DeliveryResult>> {
        let mut results = Vec::new();
        while schedule.is_up(now_ms) && !self.queue.is_empty() && now_ms >= self.next_attempt_ms {
            let readings = self.queue.peek(self.cfg.batch_cap)?;
            let batch_seq = self.queue.next_batch_seq();
            let batch = ReadingBatch::new(self.node_id.clone(), batch_seq, &readings);
            self.report.sent += readings.len();

            match self.uplink.send(&batch) {
                Ok(ack) => {
                    self.queue.ack(readings.len(), batch_seq + 1)?;
                    self.report.acked += readings.len();
                    self.report.batches_acked += 1;
                    let oldest = readings.iter().map(|r| r.ts_ms).min().unwrap_or(now_ms);
                    self.report.max_latency_ms = self.report.max_latency_ms.max(now_ms - oldest);
                    self.backoff_ms = self.cfg.backoff_initial_ms;
                    results.push(DeliveryResult::Acked {
                        batch_seq,
                        readings: readings.len(),
                        ack,
                    });
                }
                Err(UplinkError::Rejected { status, body }) => {
                    tracing::warn!(node = %self.node_id, batch_seq, status, "batch rejected, quarantining");
                    self.quarantine(&batch, status, &body)?;
                    self.queue.ack(readings.len(), batch_seq + 1)?;
                    self.report.quarantined += readings.len();
                    results.push(DeliveryResult::Quarantined {
                        batch_seq,
                        readings: readings.len(),
                        status,
                    });
                }
                Err(UplinkError::Transient(error)) => {
                    self.report.retries += 1;
                    self.next_attempt_ms = now_ms + self.backoff_ms;
                    self.backoff_ms = (self.backoff_ms * 2).min(self.cfg.backoff_max_ms);
                    results.push(DeliveryResult::Retrying {
                        batch_seq,
                        error,
                        next_attempt_ms: self.next_attempt_ms,
                    });
                    break;
                }
            }
        }
        Ok(results)
    }

    fn quarantine(&self, batch: &ReadingBatch, status: u16, body: &str) -> Result<()> {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.dead_letter_path)?;
        let mut line = serde_json::to_vec(&DeadLetter {
            status,
            body,
            batch,
        })
        .map_err(std::io::Error::from)?;
        line.push(b'\n');
        f.write_all(&line)?;
        f.sync_data()?;
        Ok(())
    }

    /// Runs flush opportunities (periodic ticks, window openings, retry
    /// deadlines) up to and including `until_ms`. With `stop_when_empty` the
    /// loop ends as soon as the queue has drained.
    pub fn advance<C: Clock>(
        &mut self,
        clock: &mut C,
        until_ms: i64,
        schedule: &ConnectivitySchedule,
        stop_when_empty: bool,
    ) -> Result<()> {
        loop {
            if stop_when_empty && self.queue.is_empty() {
                return Ok(());
            }
            let now = clock.now_ms();
            let tick = *self.next_tick_ms.get_or_insert(now + self.cfg.tick_ms);
            let mut next = tick;
            if let Some(open) = schedule.next_open_after(now) {
                next = next.min(open);
            }
            if self.next_attempt_ms > now {
                next = next.min(self.next_attempt_ms);
            }
            if next > until_ms {
                clock.advance_to(until_ms);
                return Ok(());
            }
            clock.advance_to(next);
            if next >= tick {
                self.next_tick_ms = Some(tick + self.cfg.tick_ms);
            }
            self.flush(clock.now_ms(), schedule)?;
        }
    }

    /// Feeds one trace reading at its own timestamp.
    pub fn step<C: Clock>(
        &mut self,
        clock: &mut C,
        reading: SensorReading,
        schedule: &ConnectivitySchedule,
    ) -> Result<()> {
        let ts = reading.ts_ms;
        self.advance(clock, ts, schedule, false)?;
        self.enqueue(reading)?;
        if self.queue.len() >= self.cfg.batch_cap {
            self.flush(clock.now_ms(), schedule)?;
        }
        Ok(())
    }

    /// After the drive: keep flushing until the queue drains or the schedule
    /// has no windows left.
    pub fn drain<C: Clock>(
        &mut self,
        clock: &mut C,
        schedule: &ConnectivitySchedule,
    ) -> Result<()> {
        self.flush(clock.now_ms(), schedule)?;
        if let Some(horizon) = schedule.horizon_ms() {
            if horizon > clock.now_ms() {
                self.advance(clock, horizon, schedule, true)?;
            }
        }
        Ok(())
    }

    /// Replays a whole trace against a schedule and drains afterwards.
    pub fn run_session<C: Clock>(
        &mut self,
        trace: &[SensorReading],
        schedule: &ConnectivitySchedule,
        clock: &mut C,
    ) -> Result<SessionReport> {
        for r in trace {
            self.step(clock, r.clone(), schedule)?;
        }
        self.report.sent_while_driving = self.report.sent;
        self.drain(clock, schedule)?;
        Ok(self.report())
    }
}

/// Convenience for the common case of a fresh agent replaying one trace.
pub fn run_session<U: Uplink, C: Clock>(
    dir: impl AsRef<Path>,
    trace: &[SensorReading],
    schedule: &ConnectivitySchedule,
    cfg: AgentConfig,
    uplink: U,
    clock: &mut C,
) -> Result<(SessionReport, U)> {
    let node_id = trace
        .first()
        .map(|r| r.node_id.clone())
        .ok_or_else(|| AgentError::Config("empty trace".into()))?;
    let mut agent = NodeAgent::open(dir, &node_id, cfg, uplink)?;
    let report = agent.run_session(trace, schedule, clock)?;
    Ok((report, agent.uplink))
}
