//! Transports that carry a batch to the ingestion server.

use std::time::Duration;

use podas_core::{IngestAck, ReadingBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UplinkError {
    /// Network trouble or a server-side failure; the batch is retried as-is.
    #[error("transient uplink failure: {0}")]
    Transient(String),
    /// The server refused the batch (4xx); retrying would not help.
    #[error("batch rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
}

pub trait Uplink {
    fn send(&mut self, batch: &ReadingBatch) -> Result<IngestAck, UplinkError>;
}

impl<U: Uplink + ?Sized> Uplink for Box<U> {
    fn send(&mut self, batch: &ReadingBatch) -> Result<IngestAck, UplinkError> {
        (**self).send(batch)
    }
}

/// JSON over HTTP POST to `{base}/api/v1/readings`.
pub struct HttpUplink {
    url: String,
    agent: ureq::Agent,
}

impl HttpUplink {
    pub fn new(server: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .into();
        HttpUplink {
            url: format!("{}/api/v1/readings", server.trim_end_matches('/')),
            agent,
        }
    }
}

impl Uplink for HttpUplink {
    fn send(&mut self, batch: &ReadingBatch) -> Result<IngestAck, UplinkError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(batch)
            .map_err(|e| UplinkError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => resp
                .body_mut()
                .read_json::<IngestAck>()
                .map_err(|e| UplinkError::Transient(format!("unreadable ack: {e}"))),
            400..=499 => Err(UplinkError::Rejected {
                status,
                body: resp.body_mut().read_to_string().unwrap_or_default(),
            }),
            _ => Err(UplinkError::Transient(format!("server status {status}"))),
        }
    }
}

/// Seeded fault injection around another uplink.
///
/// A send is either lost before reaching the server (`p_lost`), delivered but
/// its acknowledgment lost (`p_ack_lost`), or delivered normally.
pub struct FaultyUplink<U> {
    inner: U,
    rng: ChaCha8Rng,
    pub p_lost: f64,
    pub p_ack_lost: f64,
    pub lost: usize,
    pub acks_lost: usize,
}

impl<U: Uplink> FaultyUplink<U> {
    pub fn new(inner: U, seed: u64, p_lost: f64, p_ack_lost: f64) -> Self {
        FaultyUplink {
            inner,
            rng: ChaCha8Rng::seed_from_u64(seed),
            p_lost,
            p_ack_lost,
            lost: 0,
            acks_lost: 0,
        }
    }

    pub fn inner(&self) -> &U {
        &self.inner
    }

    pub fn into_inner(self) -> U {
        self.inner
    }
}

impl<U: Uplink> Uplink for FaultyUplink<U> {
    fn send(&mut self, batch: &ReadingBatch) -> Result<IngestAck, UplinkError> {
        let roll: f64 = self.rng.random();
        if roll < self.p_lost {
            self.lost += 1;
            return Err(UplinkError::Transient("injected: request lost".into()));
        }
        let ack = self.inner.send(batch)?;
        if roll < self.p_lost + self.p_ack_lost {
            self.acks_lost += 1;
            return Err(UplinkError::Transient("injected: ack lost".into()));
        }
        Ok(ack)
    }
}
