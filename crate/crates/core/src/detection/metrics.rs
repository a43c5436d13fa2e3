use serde::{Deserialize, Serialize};

use super::PotholeEvent;
use crate::domain::{haversine_m, GeoPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    /// matched / |truth|; `None` when there is no ground truth.
    pub recall: Option<f64>,
    /// matched / |events|; `None` when nothing was detected.
    pub precision: Option<f64>,
    pub matched: usize,
    pub missed: usize,
    pub spurious: usize,
}

/// Greedy one-to-one matching, closest pairs first, of detected events to
/// ground-truth pothole positions within `match_radius_m`.
pub fn detection_metrics(
    events: &[PotholeEvent],
    truth: &[GeoPoint],
    match_radius_m: f64,
) -> DetectionMetrics {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ei, e) in events.iter().enumerate() {
        for (ti, t) in truth.iter().enumerate() {
            let d = haversine_m(e.centroid, *t);
            if d <= match_radius_m {
                pairs.push((d, ei, ti));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut event_used = vec![false; events.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut matched = 0;
    for (_, ei, ti) in pairs {
        if !event_used[ei] && !truth_used[ti] {
            event_used[ei] = true;
            truth_used[ti] = true;
            matched += 1;
        }
    }

    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    DetectionMetrics {
        recall: ratio(matched, truth.len()),
        precision: ratio(matched, events.len()),
        matched,
        missed: truth.len() - matched,
        spurious: events.len() - matched,
    }
}
