//! Detection quality across many seeds of one scenario.

use crate::error::Result;
use crate::par::{self, Mode};
use crate::scenario::{OfflineRun, ScenarioConfig};

/// Runs the offline pipeline once per seed, in seed order.
pub fn sweep(scenario: &ScenarioConfig, seeds: &[u64], mode: Mode) -> Result<Vec<OfflineRun>> {
    par::map(mode, seeds, |&s| scenario.with_seed(s).run_offline())
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSummary {
    pub runs: usize,
    pub runs_meeting_floor: usize,
    pub mean_recall: f64,
    pub min_recall: f64,
}

/// Aggregates recall over runs that have ground truth.
pub fn summarize(runs: &[OfflineRun], recall_floor: f64) -> SweepSummary {
    let recalls: Vec<f64> = runs.iter().filter_map(|r| r.metrics.recall).collect();
    let n = recalls.len();
    SweepSummary {
        runs: runs.len(),
        runs_meeting_floor: recalls.iter().filter(|&&r| r >= recall_floor).count(),
        mean_recall: if n == 0 {
            0.0
        } else {
            recalls.iter().sum::<f64>() / n as f64
        },
        min_recall: recalls.iter().copied().fold(f64::INFINITY, f64::min),
    }
}
