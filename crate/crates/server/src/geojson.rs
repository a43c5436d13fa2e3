//! RFC 7946 rendering of pothole events.

use podas_core::PotholeEvent;
use serde_json::{json, Value};

pub fn feature(e: &PotholeEvent) -> Value {
    json!({
        "type": "Feature",
        "id": e.event_id,
        "geometry": {
            "type": "Point",
            "coordinates": [e.centroid.lon, e.centroid.lat],
        },
        "properties": {
            "event_id": e.event_id,
            "severity": e.severity,
            "confidence": e.confidence,
            "n_readings": e.n_readings,
            "first_seen_ms": e.first_seen_ms,
            "last_seen_ms": e.last_seen_ms,
        },
    })
}

pub fn feature_collection(events: &[PotholeEvent]) -> Value {
    json!({
        "type": "FeatureCollection",
        "features": events.iter().map(feature).collect::<Vec<_>>(),
    })
}
