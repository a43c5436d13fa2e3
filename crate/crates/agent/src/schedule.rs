//! Uplink availability over time, as a sorted list of half-open up-windows.

use podas_core::scenario::ConnectivityProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AgentError, Result};

/// Delay between the end of a drive and the depot upload window.
pub const DEPOT_ARRIVAL_MS: i64 = 60_000;
/// Length of the final upload window every built-in profile ends with.
pub const FINAL_WINDOW_MS: i64 = 3_600_000;
pub const PILOT_PERIOD_MS: i64 = 60_000;
pub const PILOT_WINDOW_MS: i64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivitySchedule {
    pub profile: Option<ConnectivityProfile>,
    /// `[start_ms, end_ms)` windows, sorted and disjoint.
    pub windows: Vec<(i64, i64)>,
}

impl ConnectivitySchedule {
    pub fn new(profile: Option<ConnectivityProfile>, windows: Vec<(i64, i64)>) -> Result<Self> {
        for &(s, e) in &windows {
            if s >= e {
                return Err(AgentError::Config(format!("empty window [{s}, {e})")));
            }
        }
        for w in windows.windows(2) {
            if w[0].1 > w[1].0 {
                return Err(AgentError::Config(format!(
                    "windows [{}, {}) and [{}, {}) overlap or are unsorted",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(ConnectivitySchedule { profile, windows })
    }

    /// Builds a named profile for a drive spanning `[drive_start_ms, drive_end_ms]`.
    pub fn for_profile(
        profile: ConnectivityProfile,
        drive_start_ms: i64,
        drive_end_ms: i64,
    ) -> Self {
        let upload_at = drive_end_ms + DEPOT_ARRIVAL_MS;
        let windows = match profile {
            ConnectivityProfile::AlwaysOn => vec![(drive_start_ms, drive_end_ms + FINAL_WINDOW_MS)],
            ConnectivityProfile::Depot => vec![(upload_at, upload_at + FINAL_WINDOW_MS)],
            ConnectivityProfile::Pilot => {
                let mut w = Vec::new();
                let mut s = drive_start_ms + PILOT_PERIOD_MS / 2;
                while s + PILOT_WINDOW_MS <= drive_end_ms {
                    w.push((s, s + PILOT_WINDOW_MS));
                    s += PILOT_PERIOD_MS;
                }
                w.push((upload_at, upload_at + FINAL_WINDOW_MS));
                w
            }
            ConnectivityProfile::AlwaysDown => vec![],
        };
        ConnectivitySchedule {
            profile: Some(profile),
            windows,
        }
    }

    /// `n_windows` random up-windows between `start_ms` and `end_ms`, the last
    /// of which always opens after `end_ms` so the queue can drain.
    pub fn random_churn(seed: u64, n_windows: usize, start_ms: i64, end_ms: i64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = (end_ms - start_ms).max(1);
        let mut cuts: Vec<i64> = (0..2 * n_windows.saturating_sub(1))
            .map(|_| start_ms + rng.random_range(0..span))
            .collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut windows: Vec<(i64, i64)> = cuts
            .chunks_exact(2)
            .filter(|c| c[0] < c[1])
            .map(|c| (c[0], c[1]))
            .collect();
        let final_start = end_ms + rng.random_range(1_000..DEPOT_ARRIVAL_MS);
        windows.push((final_start, final_start + FINAL_WINDOW_MS));
        ConnectivitySchedule {
            profile: None,
            windows,
        }
    }

    pub fn always_down() -> Self {
        ConnectivitySchedule {
            profile: Some(ConnectivityProfile::AlwaysDown),
            windows: vec![],
        }
    }

    fn window_index(&self, t: i64) -> Option<usize> {
        let i = self.windows.partition_point(|&(s, _)| s <= t);
        let i = i.checked_sub(1)?;
        (t < self.windows[i].1).then_some(i)
    }

    pub fn is_up(&self, t_ms: i64) -> bool {
        self.window_index(t_ms).is_some()
    }

    /// Start of the first window opening strictly after `t_ms`.
    pub fn next_open_after(&self, t_ms: i64) -> Option<i64> {
        let i = self.windows.partition_point(|&(s, _)| s <= t_ms);
        self.windows.get(i).map(|w| w.0)
    }

    /// End of the last window, after which the link never comes back.
    pub fn horizon_ms(&self) -> Option<i64> {
        self.windows.last().map(|w| w.1)
    }
}
