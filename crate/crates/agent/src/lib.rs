//! Vehicle-side store-and-forward agent.
//!
//! Readings from a sensor trace are queued durably ([`queue::CacheQueue`]),
//! uploaded in batches whenever the [`schedule::ConnectivitySchedule`] says
//! the link is up, and removed only once the server acknowledges them.
//! Delivery is at-least-once; the server deduplicates on `(node_id, seq)`.

pub mod agent;
pub mod clock;
pub mod error;
pub mod queue;
pub mod schedule;
pub mod uplink;

pub use agent::{run_session, AgentConfig, DeliveryResult, NodeAgent, SessionReport};
pub use clock::{Clock, SimClock, WallClock};
pub use error::{AgentError, Result};
pub use queue::{CacheQueue, QueueConfig};
pub use schedule::ConnectivitySchedule;
pub use uplink::{FaultyUplink, HttpUplink, Uplink, UplinkError};
