use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServerError {
    /// Malformed request; maps to 400.
    #[error("{0}")]
    BadRequest(String),

    /// Well-formed but semantically invalid; maps to 422.
    #[error("{message}")]
    Unprocessable {
        message: String,
        offending_seqs: Vec<u64>,
    },

    #[error("corrupt log: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ServerError {
    pub fn unprocessable(message: impl Into<String>) -> Self {
        ServerError::Unprocessable {
            message: message.into(),
            offending_seqs: vec![],
        }
    }
}
