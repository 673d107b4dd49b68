use std::path::Path;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use growform_core::evolution::EvolutionConfig;
use growform_core::export::ExportFormat;
use growform_core::interp::interpolation_id;
use serde::Deserialize;
use serde_json::json;

use crate::error::{ApiError, StoreError};
use crate::jobs::{JobSpec, Jobs};
use crate::store::Store;

pub struct Studio {
    pub store: Arc<Store>,
    pub jobs: Jobs,
}

impl Studio {
    pub fn open(root: &Path, workers: usize) -> Result<Self, StoreError> {
        let store = Arc::new(Store::open(root)?);
        let jobs = Jobs::start(Arc::clone(&store), workers)?;
        Ok(Studio { store, jobs })
    }
}

type AppState = State<Arc<Studio>>;
type ApiResult<T = Response> = Result<T, ApiError>;

pub fn router(studio: Arc<Studio>) -> Router {
    Router::new()
        .route("/api/runs", get(list_runs).post(submit_run))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/individuals/{id}", get(get_individual))
        .route("/api/individuals/{id}/layers", get(get_layers))
        .route("/api/individuals/{id}/export", get(export))
        .route("/api/interpolations", axum::routing::post(submit_interpolation))
        .route("/api/interpolations/{id}", get(get_interpolation))
        .fallback(|| async { ApiError::NotFound("no such endpoint".into()) })
        .with_state(studio)
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

fn found<T>(what: &str, id: &str, v: Option<T>) -> ApiResult<T> {
    v.ok_or_else(|| ApiError::NotFound(format!("{what} {id} not found")))
}

/// Runs blocking store work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, StoreError> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?.map_err(ApiError::from)
}

async fn list_runs(State(s): AppState) -> ApiResult<Json<serde_json::Value>> {
    let runs = blocking(move || s.store.list_runs()).await?;
    Ok(Json(json!({ "runs": runs })))
}

async fn submit_run(State(s): AppState, body: Bytes) -> ApiResult {
    let cfg: EvolutionConfig =
        serde_json::from_slice(&body).map_err(|e| ApiError::InvalidConfig(format!("config: {e}")))?;
    cfg.validate().map_err(|e| ApiError::InvalidConfig(e.to_string()))?;
    let run_id = cfg.run_id();
    let job = blocking(move || s.jobs.submit(JobSpec::Evolution(Box::new(cfg)))).await?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job.id, "run_id": run_id, "job": job }))).into_response())
}

async fn get_run(State(s): AppState, UrlPath(id): UrlPath<String>) -> ApiResult {
    let key = id.clone();
    let bytes = blocking(move || s.store.run_bytes(&key)).await?;
    Ok(json_bytes(found("run", &id, bytes)?))
}

async fn get_job(State(s): AppState, UrlPath(id): UrlPath<String>) -> ApiResult<Json<serde_json::Value>> {
    let job = found("job", &id, s.jobs.get(&id))?;
    Ok(Json(serde_json::to_value(job).map_err(|e| ApiError::Internal(e.to_string()))?))
}

async fn get_individual(State(s): AppState, UrlPath(id): UrlPath<String>) -> ApiResult {
    let key = id.clone();
    let bytes = blocking(move || s.store.individual_bytes(&key)).await?;
    Ok(json_bytes(found("individual", &id, bytes)?))
}

async fn get_layers(State(s): AppState, UrlPath(id): UrlPath<String>) -> ApiResult {
    let key = id.clone();
    let gz = found("individual", &id, blocking(move || s.store.layers_gz(&key)).await?)?;
    Ok(([(header::CONTENT_TYPE, "application/json"), (header::CONTENT_ENCODING, "gzip")], Body::from(gz))
        .into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(State(s): AppState, UrlPath(id): UrlPath<String>, Query(q): Query<ExportQuery>) -> ApiResult {
    let name = q.format.unwrap_or_else(|| "json".into());
    let format: ExportFormat = name.parse().map_err(|e: growform_core::Error| ApiError::UnsupportedFormat(e.to_string()))?;
    let key = id.clone();
    let text = blocking(move || match s.store.stack(&key)? {
        Some(stack) => Ok(Some(format.render(&stack)?)),
        None => Ok(None),
    })
    .await?;
    let text = found("individual", &id, text)?;
    let disposition = format!("attachment; filename=\"{id}.{}\"", format.extension());
    Ok(([(header::CONTENT_TYPE, format.content_type().to_string()), (header::CONTENT_DISPOSITION, disposition)], text)
        .into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpolationRequest {
    a: String,
    b: String,
    steps: usize,
}

/// Largest accepted number of in-between individuals.
const MAX_STEPS: usize = 10_000;

async fn submit_interpolation(State(s): AppState, body: Bytes) -> ApiResult {
    let req: InterpolationRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("request: {e}")))?;
    if req.steps > MAX_STEPS {
        return Err(ApiError::BadRequest(format!("steps must be <= {MAX_STEPS}")));
    }
    let store = Arc::clone(&s.store);
    let (ida, idb) = (req.a.clone(), req.b.clone());
    let (a, b) = blocking(move || Ok((store.individual(&ida)?, store.individual(&idb)?))).await?;
    let a = found("individual", &req.a, a)?.spec();
    let b = found("individual", &req.b, b)?.spec();
    if !a.same_environment(&b) {
        return Err(ApiError::Conflict(format!(
            "individuals {} and {} were grown in different environments (env_seed {} vs {}); interpolation needs identical environments",
            req.a, req.b, a.env_seed, b.env_seed
        )));
    }
    let interp = interpolation_id(&a.id(), &b.id(), req.steps);
    let steps = req.steps;
    let job = blocking(move || s.jobs.submit(JobSpec::Interpolation { a: Box::new(a), b: Box::new(b), steps })).await?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job.id, "interpolation_id": interp, "job": job }))).into_response())
}

async fn get_interpolation(State(s): AppState, UrlPath(id): UrlPath<String>) -> ApiResult {
    let key = id.clone();
    let bytes = blocking(move || s.store.interpolation_bytes(&key)).await?;
    Ok(json_bytes(found("interpolation", &id, bytes)?))
}
