use thiserror::Error;

pub type Result<T, E = AgentError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("reading seq {seq} is not after last enqueued seq {last}")]
    OutOfOrder { seq: u64, last: u64 },

    #[error("spill storage full ({bytes} of {cap} bytes used)")]
    StorageFull { bytes: u64, cap: u64 },

    #[error("corrupt queue state: {0}")]
    Corrupt(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("reading belongs to node {got:?}, agent is {expected:?}")]
    ForeignReading { expected: String, got: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
