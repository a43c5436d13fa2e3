//! Uplink wire format shared by the node agent and the ingestion server.

use serde::{Deserialize, Serialize};

use crate::domain::{GeoPoint, SensorReading};

/// A reading as carried inside a batch; the node id lives on the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireReading {
    pub seq: u64,
    pub ts_ms: i64,
    pub lat: f64,
    pub lon: f64,
    pub ultrasonic_in: f64,
    pub accel_z: f64,
}

/// The at-least-once upload unit. `batch_seq` is reused verbatim when the
/// same batch is retried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingBatch {
    pub node_id: String,
    pub batch_seq: u64,
    pub readings: Vec<WireReading>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestAck {
    pub accepted: usize,
    pub duplicates: usize,
}

impl From<&SensorReading> for WireReading {
    fn from(r: &SensorReading) -> Self {
        WireReading {
            seq: r.seq,
            ts_ms: r.ts_ms,
            lat: r.pos.lat,
            lon: r.pos.lon,
            ultrasonic_in: r.ultrasonic_in,
            accel_z: r.accel_z,
        }
    }
}

impl ReadingBatch {
    pub fn new(node_id: impl Into<String>, batch_seq: u64, readings: &[SensorReading]) -> Self {
        ReadingBatch {
            node_id: node_id.into(),
            batch_seq,
            readings: readings.iter().map(WireReading::from).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    pub fn to_readings(&self) -> Vec<SensorReading> {
        self.readings
            .iter()
            .map(|w| SensorReading {
                node_id: self.node_id.clone(),
                seq: w.seq,
                ts_ms: w.ts_ms,
                pos: GeoPoint {
                    lat: w.lat,
                    lon: w.lon,
                },
                ultrasonic_in: w.ultrasonic_in,
                accel_z: w.accel_z,
            })
            .collect()
    }

    /// Seq values of readings with out-of-range coordinates or non-finite /
    /// negative sensor values. Empty when the batch is acceptable.
    pub fn offending_seqs(&self) -> Vec<u64> {
        self.to_readings()
            .iter()
            .filter(|r| r.validate().is_err())
            .map(|r| r.seq)
            .collect()
    }
}
