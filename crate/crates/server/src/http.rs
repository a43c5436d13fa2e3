//! Versioned JSON API over the store.

use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use podas_core::detection::{DEFAULT_K_SIGMA, DEFAULT_SEVERE_DELTA_IN};
use podas_core::{ReadingBatch, SensorReading, Thresholds};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::error::ServerError;
use crate::geojson;
use crate::query::{Bucket, PotholeFilter, PotholeQuery};
use crate::store::Store;

pub type SharedStore = Arc<RwLock<Store>>;

impl IntoResponse for ServerError {
    fn into_response(self) -> Response {
        match self {
            ServerError::BadRequest(msg) => {
                (StatusCode::BAD_REQUEST, Json(json!({ "error": msg }))).into_response()
            }
            ServerError::Unprocessable {
                message,
                offending_seqs,
            } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                Json(json!({ "error": message, "offending_seqs": offending_seqs })),
            )
                .into_response(),
            other => {
                tracing::error!(error = %other, "internal error");
                (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    Json(json!({ "error": other.to_string() })),
                )
                    .into_response()
            }
        }
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServerError> {
    serde_json::from_slice(body)
        .map_err(|e| ServerError::BadRequest(format!("malformed body: {e}")))
}

fn read(store: &SharedStore) -> std::sync::RwLockReadGuard<'_, Store> {
    store.read().unwrap_or_else(|p| p.into_inner())
}

fn write(store: &SharedStore) -> std::sync::RwLockWriteGuard<'_, Store> {
    store.write().unwrap_or_else(|p| p.into_inner())
}

async fn post_readings(
    State(store): State<SharedStore>,
    body: Bytes,
) -> Result<impl IntoResponse, ServerError> {
    let batch: ReadingBatch = parse_body(&body)?;
    let ack = write(&store).ingest_batch(&batch)?;
    Ok(Json(ack))
}

async fn get_potholes(
    State(store): State<SharedStore>,
    Query(q): Query<PotholeQuery>,
) -> Result<impl IntoResponse, ServerError> {
    let filter = PotholeFilter::try_from(q)?;
    Ok(Json(read(&store).get_potholes(&filter)))
}

async fn get_potholes_geojson(
    State(store): State<SharedStore>,
    Query(q): Query<PotholeQuery>,
) -> Result<impl IntoResponse, ServerError> {
    let filter = PotholeFilter::try_from(q)?;
    let events = read(&store).get_potholes(&filter);
    Ok((
        [("content-type", "application/geo+json")],
        Json(geojson::feature_collection(&events)),
    ))
}

#[derive(Debug, Deserialize)]
struct StatsQuery {
    bucket: Option<String>,
    since_ms: Option<i64>,
}

async fn get_stats(
    State(store): State<SharedStore>,
    Query(q): Query<StatsQuery>,
) -> Result<impl IntoResponse, ServerError> {
    let bucket: Bucket = q.bucket.as_deref().unwrap_or("day").parse()?;
    Ok(Json(read(&store).stats(bucket, q.since_ms)?))
}

async fn get_thresholds(State(store): State<SharedStore>) -> impl IntoResponse {
    Json(read(&store).thresholds())
}

async fn put_thresholds(
    State(store): State<SharedStore>,
    body: Bytes,
) -> Result<impl IntoResponse, ServerError> {
    let t: Thresholds = parse_body(&body)?;
    let mut s = write(&store);
    s.put_thresholds(t)?;
    Ok(Json(s.thresholds()))
}

#[derive(Debug, Deserialize)]
struct CalibrateRequest {
    readings: Vec<SensorReading>,
    k_sigma: Option<f64>,
    severe_delta_in: Option<f64>,
}

async fn post_calibrate(
    State(store): State<SharedStore>,
    body: Bytes,
) -> Result<impl IntoResponse, ServerError> {
    let req: CalibrateRequest = parse_body(&body)?;
    let t = write(&store).calibrate(
        &req.readings,
        req.k_sigma.unwrap_or(DEFAULT_K_SIGMA),
        req.severe_delta_in.unwrap_or(DEFAULT_SEVERE_DELTA_IN),
    )?;
    Ok(Json(t))
}

async fn get_version(State(store): State<SharedStore>) -> impl IntoResponse {
    Json(json!({ "version": read(&store).version() }))
}

async fn healthz() -> impl IntoResponse {
    Json(json!({ "status": "ok" }))
}

pub fn router(store: SharedStore, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/v1/readings", post(post_readings))
        .route("/api/v1/potholes", get(get_potholes))
        .route("/api/v1/potholes.geojson", get(get_potholes_geojson))
        .route("/api/v1/stats", get(get_stats))
        .route(
            "/api/v1/thresholds",
            get(get_thresholds).put(put_thresholds),
        )
        .route("/api/v1/calibrate", post(post_calibrate))
        .route("/api/v1/version", get(get_version))
        .route("/api/v1/healthz", get(healthz))
        .with_state(store);
    match ui_dir {
        Some(dir) => api.nest_service("/ui", tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}
