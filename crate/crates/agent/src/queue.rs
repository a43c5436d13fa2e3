//! Durable FIFO of readings awaiting upload.
//!
//! Every enqueued reading is appended to a line-delimited JSON log before
//! `enqueue` returns. The head of the queue (up to `mem_cap` readings) is also
//! held in memory; anything beyond that lives only in the log ("spilled") and
//! is paged back in as the head drains. A small side file records how far the
//! server has acknowledged, so a restarted agent resumes exactly where the
//! previous one stopped.

use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use podas_core::SensorReading;
use serde::{Deserialize, Serialize};

use crate::error::{AgentError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
struct Head {
    /// Byte offset in the log of the first unacknowledged reading.
    acked_offset: u64,
    acked_count: u64,
    last_seq: Option<u64>,
    next_batch_seq: u64,
}

#[derive(Debug, Clone)]
pub struct QueueConfig {
    pub mem_cap: usize,
    /// Upper bound on the log size; `None` means limited only by the disk.
    pub max_log_bytes: Option<u64>,
    /// fsync the log after every append and the side file after every ack.
    pub fsync: bool,
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueConfig {
            mem_cap: 100,
            max_log_bytes: None,
            fsync: true,
        }
    }
}

pub struct CacheQueue {
    cfg: QueueConfig,
    log_path: PathBuf,
    head_path: PathBuf,
    log: File,
    log_len: u64,
    head: Head,
    /// Head of the queue with each reading's end offset in the log.
    mem: VecDeque<(SensorReading, u64)>,
    /// Log offset of the first reading not yet paged into memory.
    spill_cursor: u64,
    spilled: usize,
}

fn file_stem(node_id: &str) -> String {
    node_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

impl CacheQueue {
    /// Opens (or creates) the queue for `node_id` under `dir`, replaying any
    /// unacknowledged readings left by a previous run.
    pub fn open(dir: impl AsRef<Path>, node_id: &str, cfg: QueueConfig) -> Result<Self> {
        if cfg.mem_cap == 0 {
            return Err(AgentError::Config("mem_cap must be > 0".into()));
        }
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let stem = file_stem(node_id);
        let log_path = dir.join(format!("{stem}.spill.jsonl"));
        let head_path = dir.join(format!("{stem}.offset.json"));

        let mut head: Head = match fs::read_to_string(&head_path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| AgentError::Corrupt(format!("{}: {e}", head_path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Head::default(),
            Err(e) => return Err(e.into()),
        };

        let log = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&log_path)?;

        // Scan the unacknowledged tail; drop a torn final line.
        let mut len = log.metadata()?.len();
        head.acked_offset = head.acked_offset.min(len);
        let mut reader = BufReader::new(File::open(&log_path)?);
        reader.seek(SeekFrom::Start(head.acked_offset))?;
        let mut offset = head.acked_offset;
        let mut pending = 0usize;
        let mut mem = VecDeque::new();
        let mut spill_cursor = head.acked_offset;
        let mut line = String::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            if !line.ends_with('\n') {
                tracing::warn!(offset, "dropping torn record at end of spill log");
                log.set_len(offset)?;
                len = offset;
                break;
            }
            let reading: SensorReading = serde_json::from_str(line.trim_end())
                .map_err(|e| AgentError::Corrupt(format!("spill log at byte {offset}: {e}")))?;
            offset += n as u64;
            head.last_seq = Some(head.last_seq.map_or(reading.seq, |s| s.max(reading.seq)));
            if mem.len() < cfg.mem_cap {
                mem.push_back((reading, offset));
                spill_cursor = offset;
            }
            pending += 1;
        }
        let spilled = pending - mem.len();

        Ok(CacheQueue {
            cfg,
            log_path,
            head_path,
            log,
            log_len: len,
            head,
            mem,
            spill_cursor,
            spilled,
        })
    }

    pub fn len(&self) -> usize {
        self.mem.len() + self.spilled
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn in_memory(&self) -> usize {
        self.mem.len()
    }

    pub fn spilled(&self) -> usize {
        self.spilled
    }

    pub fn acked_count(&self) -> u64 {
        self.head.acked_count
    }

    pub fn next_batch_seq(&self) -> u64 {
        self.head.next_batch_seq
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    /// Appends a reading at the tail. Seq numbers must strictly increase.
    pub fn enqueue(&mut self, reading: SensorReading) -> Result<()> {
        if let Some(last) = self.head.last_seq {
            if reading.seq <= last {
                return Err(AgentError::OutOfOrder {
                    seq: reading.seq,
                    last,
                });
            }
        }
        let mut line = serde_json::to_vec(&reading).map_err(std::io::Error::from)?;
        line.push(b'\n');
        if let Some(cap) = self.cfg.max_log_bytes {
            if self.log_len + line.len() as u64 > cap {
                return Err(AgentError::StorageFull {
                    bytes: self.log_len,
                    cap,
                });
            }
        }
        self.log.write_all(&line)?;
        if self.cfg.fsync {
            self.log.sync_data()?;
        }
        self.log_len += line.len() as u64;
        self.head.last_seq = Some(reading.seq);

        if self.spilled == 0 && self.mem.len() < self.cfg.mem_cap {
            self.mem.push_back((reading, self.log_len));
            self.spill_cursor = self.log_len;
        } else {
            self.spilled += 1;
        }
        Ok(())
    }

    fn refill(&mut self) -> Result<()> {
        if self.spilled == 0 || self.mem.len() >= self.cfg.mem_cap {
            return Ok(());
        }
        let mut reader = BufReader::new(File::open(&self.log_path)?);
        reader.seek(SeekFrom::Start(self.spill_cursor))?;
        let mut line = String::new();
        while self.spilled > 0 && self.mem.len() < self.cfg.mem_cap {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 || !line.ends_with('\n') {
                return Err(AgentError::Corrupt(format!(
                    "spill log ended at byte {} with {} readings outstanding",
                    self.spill_cursor, self.spilled
                )));
            }
            let reading: SensorReading = serde_json::from_str(line.trim_end()).map_err(|e| {
                AgentError::Corrupt(format!("spill log at byte {}: {e}", self.spill_cursor))
            })?;
            self.spill_cursor += n as u64;
            self.mem.push_back((reading, self.spill_cursor));
            self.spilled -= 1;
        }
        Ok(())
    }

    /// The first `max` readings, without removing them.
    pub fn peek(&mut self, max: usize) -> Result<Vec<SensorReading>> {
        self.refill()?;
        Ok(self.mem.iter().take(max).map(|(r, _)| r.clone()).collect())
    }

    /// Removes the first `n` readings after the server acknowledged (or the
    /// agent quarantined) them, persisting the new head and the batch counter.
    pub fn ack(&mut self, n: usize, next_batch_seq: u64) -> Result<()> {
        self.refill()?;
        if n > self.mem.len() {
            return Err(AgentError::Corrupt(format!(
                "ack of {n} readings with only {} at the head",
                self.mem.len()
            )));
        }
        let mut end = self.head.acked_offset;
        for _ in 0..n {
            let (_, e) = self.mem.pop_front().expect("checked above");
            end = e;
        }
        self.head.acked_offset = end;
        self.head.acked_count += n as u64;
        self.head.next_batch_seq = next_batch_seq;
        self.write_head()?;

        if self.is_empty() && self.log_len > 0 {
            self.compact()?;
        }
        Ok(())
    }

    /// Truncates a fully acknowledged log. A crash between the two steps
    /// leaves an offset past the end of the file, which `open` clamps.
    fn compact(&mut self) -> Result<()> {
        self.log.set_len(0)?;
        if self.cfg.fsync {
            self.log.sync_all()?;
        }
        self.log_len = 0;
        self.spill_cursor = 0;
        self.head.acked_offset = 0;
        self.write_head()
    }

    fn write_head(&self) -> Result<()> {
        let tmp = self.head_path.with_extension("json.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&serde_json::to_vec(&self.head).map_err(std::io::Error::from)?)?;
            if self.cfg.fsync {
                f.sync_all()?;
            }
        }
        fs::rename(&tmp, &self.head_path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use podas_core::GeoPoint;

    fn reading(seq: u64) -> SensorReading {
        SensorReading {
            node_id: "bus-7".into(),
            seq,
            ts_ms: seq as i64 * 833,
            pos: GeoPoint {
                lat: 13.35,
                lon: 74.78 + seq as f64 * 1e-5,
            },
            ultrasonic_in: 6.0,
            accel_z: 950.0,
        }
    }

    fn cfg(mem_cap: usize) -> QueueConfig {
        QueueConfig {
            mem_cap,
            fsync: false,
            ..QueueConfig::default()
        }
    }

    fn drain(q: &mut CacheQueue, batch: usize) -> Vec<u64> {
        let mut out = vec![];
        let mut bs = q.next_batch_seq();
        while !q.is_empty() {
            let b = q.peek(batch).unwrap();
            out.extend(b.iter().map(|r| r.seq));
            bs += 1;
            q.ack(b.len(), bs).unwrap();
        }
        out
    }

    #[test]
    fn spills_beyond_mem_cap_and_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut q = CacheQueue::open(dir.path(), "bus-7", cfg(100)).unwrap();
        for s in 0..150 {
            q.enqueue(reading(s)).unwrap();
        }
        assert_eq!(q.in_memory(), 100);
        assert_eq!(q.spilled(), 50);
        assert_eq!(drain(&mut q, 50), (0..150).collect::<Vec<_>>());
        assert!(q.is_empty());
    }

    #[test]
    fn single_enqueue() {
        let dir = tempfile::tempdir().unwrap();
        let mut q = CacheQueue::open(dir.path(), "bus-7", cfg(10)).unwrap();
        q.enqueue(reading(0)).unwrap();
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn rejects_out_of_order_seq() {
        let dir = tempfile::tempdir().unwrap();
        let mut q = CacheQueue::open(dir.path(), "bus-7", cfg(10)).unwrap();
        q.enqueue(reading(7)).unwrap();
        assert!(matches!(
            q.enqueue(reading(5)),
            Err(AgentError::OutOfOrder { seq: 5, last: 7 })
        ));
        assert!(q.enqueue(reading(7)).is_err());
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn storage_full_is_an_error_not_a_drop() {
        let dir = tempfile::tempdir().unwrap();
        let mut q = CacheQueue::open(
            dir.path(),
            "bus-7",
            QueueConfig {
                mem_cap: 4,
                max_log_bytes: Some(400),
                fsync: false,
            },
        )
        .unwrap();
        let mut err = None;
        for s in 0..20 {
            if let Err(e) = q.enqueue(reading(s)) {
                err = Some((s, e));
                break;
            }
        }
        let (s, e) = err.expect("cap must be hit");
        assert!(matches!(e, AgentError::StorageFull { .. }));
        assert_eq!(q.len(), s as usize);
    }

    #[test]
    fn restart_resumes_after_acked_head() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut q = CacheQueue::open(dir.path(), "bus-7", cfg(8)).unwrap();
            for s in 0..30 {
                q.enqueue(reading(s)).unwrap();
            }
            let b = q.peek(5).unwrap();
            q.ack(b.len(), 1).unwrap();
            // dropped without further acks: simulated crash
        }
        let mut q = CacheQueue::open(dir.path(), "bus-7", cfg(8)).unwrap();
        assert_eq!(q.len(), 25);
        assert_eq!(q.in_memory(), 8);
        assert_eq!(q.next_batch_seq(), 1);
        assert!(q.enqueue(reading(29)).is_err(), "last seq survives restart");
        q.enqueue(reading(30)).unwrap();
        assert_eq!(drain(&mut q, 7), (5..31).collect::<Vec<_>>());
    }

    #[test]
    fn torn_tail_is_discarded() {
        let dir = tempfile::tempdir().unwrap();
        let log = {
            let mut q = CacheQueue::open(dir.path(), "bus-7", cfg(8)).unwrap();
            for s in 0..3 {
                q.enqueue(reading(s)).unwrap();
            }
            q.log_path().to_path_buf()
        };
        let mut f = OpenOptions::new().append(true).open(&log).unwrap();
        f.write_all(b"{\"node_id\":\"bus-7\",\"se").unwrap();
        drop(f);
        let mut q = CacheQueue::open(dir.path(), "bus-7", cfg(8)).unwrap();
        assert_eq!(q.len(), 3);
        q.enqueue(reading(3)).unwrap();
        assert_eq!(drain(&mut q, 10), vec![0, 1, 2, 3]);
    }

    #[test]
    fn compaction_truncates_drained_log() {
        let dir = tempfile::tempdir().unwrap();
        let mut q = CacheQueue::open(dir.path(), "bus-7", cfg(8)).unwrap();
        for s in 0..12 {
            q.enqueue(reading(s)).unwrap();
        }
        drain(&mut q, 5);
        assert_eq!(fs::metadata(q.log_path()).unwrap().len(), 0);
        q.enqueue(reading(12)).unwrap();
        drop(q);
        let q = CacheQueue::open(dir.path(), "bus-7", cfg(8)).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.acked_count(), 12);
    }
}
