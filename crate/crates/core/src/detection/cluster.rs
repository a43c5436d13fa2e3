use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Confidence, PointLabel};
use crate::domain::{haversine_m, GeoPoint, SensorReading, Severity};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MemberRef {
    pub node_id: String,
    pub seq: u64,
}

/// A geolocated pothole built from one or more pothole-labelled readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotholeEvent {
    pub event_id: String,
    pub centroid: GeoPoint,
    pub severity: Severity,
    pub confidence: Confidence,
    pub n_readings: usize,
    pub first_seen_ms: i64,
    pub last_seen_ms: i64,
    pub member_refs: Vec<MemberRef>,
}

impl PotholeEvent {
    fn absorb(&mut self, reading: &SensorReading, label: &PointLabel) {
        self.n_readings += 1;
        let n = self.n_readings as f64;
        self.centroid.lat += (reading.pos.lat - self.centroid.lat) / n;
        self.centroid.lon += (reading.pos.lon - self.centroid.lon) / n;
        self.severity = self.severity.max(label.severity);
        self.confidence = self.confidence.max(label.confidence);
        self.first_seen_ms = self.first_seen_ms.min(reading.ts_ms);
        self.last_seen_ms = self.last_seen_ms.max(reading.ts_ms);
        self.member_refs.push(MemberRef {
            node_id: reading.node_id.clone(),
            seq: reading.seq,
        });
    }
}

/// What [`Clusterer::insert`] did with a reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterOutcome {
    /// Not a pothole point.
    Ignored,
    /// Reading already belongs to an event.
    Duplicate,
    Founded(usize),
    Joined(usize),
}

/// Greedy incremental clustering: each pothole point joins the nearest event
/// whose current centroid is within the radius, otherwise it founds a new one.
/// Ties go to the older event.
#[derive(Debug, Clone)]
pub struct Clusterer {
    radius_m: f64,
    events: Vec<PotholeEvent>,
    members: HashSet<(String, u64)>,
    next_id: u64,
}

impl Clusterer {
    pub fn new(radius_m: f64) -> Self {
        Clusterer {
            radius_m,
            events: Vec::new(),
            members: HashSet::new(),
            next_id: 1,
        }
    }

    /// Resumes clustering on top of an existing event set.
    pub fn from_events(radius_m: f64, events: Vec<PotholeEvent>) -> Self {
        let members = events
            .iter()
            .flat_map(|e| e.member_refs.iter().map(|m| (m.node_id.clone(), m.seq)))
            .collect();
        let next_id = events
            .iter()
            .filter_map(|e| e.event_id.strip_prefix("ev-")?.parse::<u64>().ok())
            .max()
            .unwrap_or(0)
            .max(events.len() as u64)
            + 1;
        Clusterer {
            radius_m,
            events,
            members,
            next_id,
        }
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn events(&self) -> &[PotholeEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<PotholeEvent> {
        self.events
    }

    pub fn contains(&self, node_id: &str, seq: u64) -> bool {
        self.members.contains(&(node_id.to_string(), seq))
    }

    fn nearest_within_radius(&self, p: GeoPoint) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.events.iter().enumerate() {
            let d = haversine_m(e.centroid, p);
            if d <= self.radius_m && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn insert(&mut self, reading: &SensorReading, label: &PointLabel) -> ClusterOutcome {
        if label.severity != Severity::Pothole {
            return ClusterOutcome::Ignored;
        }
        let key = (reading.node_id.clone(), reading.seq);
        if self.members.contains(&key) {
            return ClusterOutcome::Duplicate;
        }
        self.members.insert(key);

        if let Some(i) = self.nearest_within_radius(reading.pos) {
            self.events[i].absorb(reading, label);
            return ClusterOutcome::Joined(i);
        }

        let id = format!("ev-{:06}", self.next_id);
        self.next_id += 1;
        self.events.push(PotholeEvent {
            event_id: id,
            centroid: reading.pos,
            severity: label.severity,
            confidence: label.confidence,
            n_readings: 1,
            first_seen_ms: reading.ts_ms,
            last_seen_ms: reading.ts_ms,
            member_refs: vec![MemberRef {
                node_id: reading.node_id.clone(),
                seq: reading.seq,
            }],
        });
        ClusterOutcome::Founded(self.events.len() - 1)
    }
}

/// Merges time-ordered labelled readings into `existing`, returning the
/// updated event list.
pub fn cluster_events(
    labeled: &[(SensorReading, PointLabel)],
    cluster_radius_m: f64,
    existing: Vec<PotholeEvent>,
) -> Vec<PotholeEvent> {
    let mut c = Clusterer::from_events(cluster_radius_m, existing);
    for (r, l) in labeled {
        c.insert(r, l);
    }
    c.into_events()
}
