//! Time sources for the agent loop.

use std::time::{Duration, Instant};

pub trait Clock {
    fn now_ms(&self) -> i64;
    /// Moves time forward to `t_ms`; never moves backwards.
    fn advance_to(&mut self, t_ms: i64);
}

/// Jumps instantly; used for reproducible replays and in every test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    now: i64,
}

impl SimClock {
    pub fn new(start_ms: i64) -> Self {
        SimClock { now: start_ms }
    }
}

impl Clock for SimClock {
    fn now_ms(&self) -> i64 {
        self.now
    }

    fn advance_to(&mut self, t_ms: i64) {
        self.now = self.now.max(t_ms);
    }
}

/// Maps trace time onto the wall clock: `start_ms` corresponds to the moment
/// the clock was created, and advancing sleeps for real.
#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    start_ms: i64,
    started: Instant,
}

impl WallClock {
    pub fn new(start_ms: i64) -> Self {
        WallClock {
            start_ms,
            started: Instant::now(),
        }
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> i64 {
        self.start_ms + self.started.elapsed().as_millis() as i64
    }

    fn advance_to(&mut self, t_ms: i64) {
        let wait = t_ms - self.now_ms();
        if wait > 0 {
            std::thread::sleep(Duration::from_millis(wait as u64));
        }
    }
}
