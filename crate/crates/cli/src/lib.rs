//! Library side of the `podas` binary, shared with its integration tests.

pub mod client;
pub mod commands;
pub mod demo;
pub mod files;

pub use demo::{run_demo, DemoOptions, DemoOutcome, DemoReport};

/// An error caused by how the command was invoked rather than by what
/// happened while running it. The binary exits with status 2 for these.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
