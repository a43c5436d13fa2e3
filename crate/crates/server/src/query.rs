//! Event filters and time-bucketed statistics.

use std::str::FromStr;

use podas_core::{PotholeEvent, Severity};
use serde::{Deserialize, Serialize};

use crate::error::ServerError;

/// `[min_lon, min_lat, max_lon, max_lat]`, GeoJSON order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn new(
        min_lon: f64,
        min_lat: f64,
        max_lon: f64,
        max_lat: f64,
    ) -> Result<Self, ServerError> {
        let all_finite = [min_lon, min_lat, max_lon, max_lat]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || min_lon > max_lon || min_lat > max_lat {
            return Err(ServerError::BadRequest(format!(
                "bbox must be min_lon,min_lat,max_lon,max_lat with min <= max, got [{min_lon}, {min_lat}, {max_lon}, {max_lat}]"
            )));
        }
        Ok(BBox {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        })
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.min_lat..=self.max_lat).contains(&lat) && (self.min_lon..=self.max_lon).contains(&lon)
    }
}

impl FromStr for BBox {
    type Err = ServerError;

    fn from_str(s: &str) -> Result<Self, ServerError> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| ServerError::BadRequest(format!("bbox {s:?} is not four numbers")))?;
        match parts[..] {
            [a, b, c, d] => BBox::new(a, b, c, d),
            _ => Err(ServerError::BadRequest(format!(
                "bbox {s:?} is not four numbers"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PotholeFilter {
    pub bbox: Option<BBox>,
    /// Events last seen at or after this instant.
    pub since_ms: Option<i64>,
    pub min_severity: Option<Severity>,
}

impl PotholeFilter {
    pub fn matches(&self, e: &PotholeEvent) -> bool {
        self.bbox
            .is_none_or(|b| b.contains(e.centroid.lat, e.centroid.lon))
            && self.since_ms.is_none_or(|s| e.last_seen_ms >= s)
            && self.min_severity.is_none_or(|m| e.severity >= m)
    }

    /// Matching events, most recently seen first (ties by id).
    pub fn apply<'a>(
        &self,
        events: impl IntoIterator<Item = &'a PotholeEvent>,
    ) -> Vec<PotholeEvent> {
        let mut out: Vec<PotholeEvent> = events
            .into_iter()
            .filter(|e| self.matches(e))
            .cloned()
            .collect();
        out.sort_by(|a, b| {
            b.last_seen_ms
                .cmp(&a.last_seen_ms)
                .then_with(|| a.event_id.cmp(&b.event_id))
        });
        out
    }
}

/// Raw query-string form, shared by the list and GeoJSON endpoints.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct PotholeQuery {
    pub bbox: Option<String>,
    pub since_ms: Option<i64>,
    pub min_severity: Option<String>,
}

impl TryFrom<PotholeQuery> for PotholeFilter {
    type Error = ServerError;

    fn try_from(q: PotholeQuery) -> Result<Self, ServerError> {
        let nonempty = |s: Option<String>| s.filter(|s| !s.is_empty());
        Ok(PotholeFilter {
            bbox: nonempty(q.bbox).map(|s| s.parse()).transpose()?,
            since_ms: q.since_ms,
            min_severity: nonempty(q.min_severity)
                .map(|s| {
                    s.parse::<Severity>()
                        .map_err(|e| ServerError::BadRequest(e.to_string()))
                })
                .transpose()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    Hour,
    Day,
}

impl Bucket {
    pub fn width_ms(self) -> i64 {
        match self {
            Bucket::Hour => 3_600_000,
            Bucket::Day => 86_400_000,
        }
    }

    pub fn floor(self, t_ms: i64) -> i64 {
        t_ms.div_euclid(self.width_ms()) * self.width_ms()
    }
}

impl FromStr for Bucket {
    type Err = ServerError;

    fn from_str(s: &str) -> Result<Self, ServerError> {
        match s {
            "hour" => Ok(Bucket::Hour),
            "day" => Ok(Bucket::Day),
            other => Err(ServerError::BadRequest(format!(
                "bucket must be day or hour, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsBucket {
    pub bucket_start_ms: i64,
    pub new_events: u64,
    pub new_readings: u64,
}

/// Upper bound on the number of buckets one stats query may return.
pub const MAX_STATS_BUCKETS: i64 = 100_000;

/// Counts events by `first_seen_ms` bucket and readings by timestamp bucket.
///
/// The series runs from the bucket containing `since_ms` (or the earliest
/// datum) to the bucket of the latest datum, zero-filled. Data before
/// `since_ms` is ignored. An empty store without `since_ms` yields an empty
/// series.
pub fn bucket_counts(
    event_times: impl Iterator<Item = i64>,
    reading_times: impl Iterator<Item = i64>,
    bucket: Bucket,
    since_ms: Option<i64>,
) -> Result<Vec<StatsBucket>, ServerError> {
    let keep = |t: &i64| since_ms.is_none_or(|s| *t >= s);
    let events: Vec<i64> = event_times.filter(keep).collect();
    let readings: Vec<i64> = reading_times.filter(keep).collect();

    let data_min = events.iter().chain(&readings).min().copied();
    let data_max = events.iter().chain(&readings).max().copied();
    let start = match (since_ms, data_min) {
        (Some(s), _) => bucket.floor(s),
        (None, Some(m)) => bucket.floor(m),
        (None, None) => return Ok(vec![]),
    };
    let end = data_max.map_or(start, |m| bucket.floor(m).max(start));
    let n = (end - start) / bucket.width_ms() + 1;
    if n > MAX_STATS_BUCKETS {
        return Err(ServerError::BadRequest(format!(
            "stats range spans {n} buckets (limit {MAX_STATS_BUCKETS})"
        )));
    }

    let mut out: Vec<StatsBucket> = (0..n)
        .map(|i| StatsBucket {
            bucket_start_ms: start + i * bucket.width_ms(),
            new_events: 0,
            new_readings: 0,
        })
        .collect();
    let idx = |t: i64| ((bucket.floor(t) - start) / bucket.width_ms()) as usize;
    for t in events {
        out[idx(t)].new_events += 1;
    }
    for t in readings {
        out[idx(t)].new_readings += 1;
    }
    Ok(out)
}
