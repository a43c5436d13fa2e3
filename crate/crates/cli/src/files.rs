//! Reading and writing the on-disk artifact formats.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use podas_core::{jsonl, GeoPoint, PotholeEvent, RoadProfile, SensorReading, Thresholds};
use serde::Serialize;
use serde_json::Value;

pub fn read_trace(path: &Path) -> Result<Vec<SensorReading>> {
    let readings: Vec<SensorReading> =
        jsonl::read(path).with_context(|| format!("reading trace {}", path.display()))?;
    for (i, r) in readings.iter().enumerate() {
        r.validate()
            .with_context(|| format!("trace {}: record {}", path.display(), i + 1))?;
    }
    Ok(readings)
}

/// A profile file holds exactly one `RoadProfile` record.
pub fn read_profile(path: &Path) -> Result<RoadProfile> {
    let mut v: Vec<RoadProfile> =
        jsonl::read(path).with_context(|| format!("reading profile {}", path.display()))?;
    match v.len() {
        1 => Ok(v.remove(0)),
        n => bail!(
            "profile {} must contain exactly one record, found {n}",
            path.display()
        ),
    }
}

pub fn read_thresholds(path: &Path) -> Result<Thresholds> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading thresholds {}", path.display()))?;
    let t: Thresholds = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("thresholds {}: line {}: {e}", path.display(), e.line()))?;
    t.validate()
        .with_context(|| format!("thresholds {}", path.display()))?;
    Ok(t)
}

fn is_feature_collection(text: &str) -> bool {
    serde_json::from_str::<Value>(text)
        .is_ok_and(|v| v.get("type").and_then(Value::as_str) == Some("FeatureCollection"))
}

/// Events as line-delimited JSON, or a GeoJSON FeatureCollection as written
/// by `demo` and `export`.
pub fn read_events(path: &Path) -> Result<Vec<PotholeEvent>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading events {}", path.display()))?;
    if is_feature_collection(&text) {
        let fc: Value = serde_json::from_str(&text)?;
        return events_from_geojson(&fc).with_context(|| format!("events {}", path.display()));
    }
    jsonl::parse(text.as_bytes()).with_context(|| format!("reading events {}", path.display()))
}

fn events_from_geojson(fc: &Value) -> Result<Vec<PotholeEvent>> {
    let features = fc["features"]
        .as_array()
        .context("FeatureCollection without features")?;
    features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let coords = f["geometry"]["coordinates"]
                .as_array()
                .filter(|c| c.len() >= 2)
                .with_context(|| format!("feature {i}: missing point coordinates"))?;
            let (lon, lat) = (coords[0].as_f64(), coords[1].as_f64());
            let centroid = match (lat, lon) {
                (Some(lat), Some(lon)) => GeoPoint { lat, lon },
                _ => bail!("feature {i}: non-numeric coordinates"),
            };
            let mut props = f["properties"].clone();
            if !props.is_object() {
                bail!("feature {i}: missing properties");
            }
            props["centroid"] = serde_json::to_value(centroid)?;
            props["member_refs"] = Value::Array(vec![]);
            serde_json::from_value(props).with_context(|| format!("feature {i}: bad properties"))
        })
        .collect()
}

/// Ground truth as one point per line; profile records are expanded to
/// their pothole centers.
pub fn read_truth(path: &Path) -> Result<Vec<GeoPoint>> {
    let lines: Vec<Value> =
        jsonl::read(path).with_context(|| format!("reading truth {}", path.display()))?;
    let mut out = Vec::new();
    for (i, v) in lines.into_iter().enumerate() {
        if v.get("potholes").is_some() {
            let p: RoadProfile = serde_json::from_value(v).with_context(|| {
                format!("truth {}: record {}: bad profile", path.display(), i + 1)
            })?;
            out.extend(p.ground_truth());
        } else {
            let g: GeoPoint = serde_json::from_value(v).with_context(|| {
                format!(
                    "truth {}: record {}: expected {{lat, lon}}",
                    path.display(),
                    i + 1
                )
            })?;
            out.push(g);
        }
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    jsonl::write(path, records).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
