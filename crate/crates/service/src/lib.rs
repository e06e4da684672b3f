//! HTTP/JSON front end over immutable in-memory dataset snapshots.
//!
//! All routes live under `/v1`. Every error body is `{code, message}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use repscape_core::pipeline::{self, Analysis, AnalysisSpec, ScoringParams};
use repscape_core::{
    BaselineConfig, Dataset, Error, ErrorClass, FilterPredicate, HistogramKind, MemberPick,
    SampleEntry, ScoreMode, SelectionConfig,
};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

/// Uploads larger than this are refused.
pub const MAX_UPLOAD_BYTES: usize = 512 * 1024 * 1024;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetHandle {
    pub id: String,
    pub rows: usize,
    pub variable_count: usize,
    pub variables: Vec<String>,
    /// Seconds since the Unix epoch.
    pub loaded_at: u64,
}

struct Snapshot {
    handle: DatasetHandle,
    data: Arc<Dataset>,
}

#[derive(Default)]
pub struct AppState {
    next_id: AtomicU64,
    datasets: RwLock<HashMap<String, Arc<Snapshot>>>,
    // fitted analyses keyed by (handle, variables + filters)
    models: RwLock<HashMap<(String, String), Arc<Analysis>>>,
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(AppState::default())
    }

    fn snapshot(&self, id: &str) -> Result<Arc<Snapshot>, ApiError> {
        self.datasets
            .read()
            .expect("dataset lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    fn analysis(&self, id: &str, spec: &AnalysisSpec) -> Result<(Arc<Dataset>, Arc<Analysis>), ApiError> {
        let snap = self.snapshot(id)?;
        let key = (id.to_string(), spec.cache_key());
        if let Some(a) = self.models.read().expect("model lock").get(&key) {
            return Ok((snap.data.clone(), a.clone()));
        }
        let a = Arc::new(Analysis::prepare(&snap.data, spec)?);
        self.models
            .write()
            .expect("model lock")
            .insert(key, a.clone());
        Ok((snap.data.clone(), a))
    }

    pub fn cached_models(&self) -> usize {
        self.models.read().expect("model lock").len()
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
            },
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_dataset", format!("no dataset with id `{id}`"))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match (&e, e.class()) {
            (Error::EmptyAfterFilter, _) | (_, ErrorClass::Computation) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn require_content_type(headers: &HeaderMap, want: &str) -> ApiResult<()> {
    let got = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    let essence = got.split(';').next().unwrap_or("").trim();
    if essence.eq_ignore_ascii_case(want) {
        Ok(())
    } else {
        Err(ApiError::new(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "unsupported_media_type",
            format!("expected content type {want}, got `{got}`"),
        ))
    }
}

fn json_body<T: DeserializeOwned>(headers: &HeaderMap, body: &Bytes) -> ApiResult<T> {
    require_content_type(headers, "application/json")?;
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.to_string()))
}

// numeric work runs off the async workers
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    })?
}

async fn upload(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<DatasetHandle>)> {
    require_content_type(&headers, "text/csv")?;
    let data = blocking(move || Ok(Dataset::ingest_csv(&body[..])?)).await?;
    let n = state.next_id.fetch_add(1, Ordering::Relaxed) + 1;
    let handle = DatasetHandle {
        id: format!("ds-{n}"),
        rows: data.n_rows(),
        variable_count: data.n_vars(),
        variables: data.variable_names(),
        loaded_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    tracing::info!(id = %handle.id, rows = handle.rows, "dataset loaded");
    state.datasets.write().expect("dataset lock").insert(
        handle.id.clone(),
        Arc::new(Snapshot {
            handle: handle.clone(),
            data: Arc::new(data),
        }),
    );
    Ok((StatusCode::CREATED, Json(handle)))
}

async fn describe(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<DatasetHandle>> {
    Ok(Json(state.snapshot(&id)?.handle.clone()))
}

async fn remove(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    if state.datasets.write().expect("dataset lock").remove(&id).is_none() {
        return Err(ApiError::not_found(&id));
    }
    state
        .models
        .write()
        .expect("model lock")
        .retain(|(handle, _), _| handle != &id);
    Ok(StatusCode::NO_CONTENT)
}

/// Body of `POST /v1/datasets/{id}/representativeness`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepresentativenessRequest {
    #[serde(flatten)]
    pub analysis: AnalysisSpec,
    pub samples: Vec<SampleEntry>,
    #[serde(flatten)]
    pub scoring: ScoringParams,
}

async fn representativeness(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    state.snapshot(&id)?;
    let req: RepresentativenessRequest = json_body(&headers, &body)?;
    blocking(move || {
        let (full, a) = state.analysis(&id, &req.analysis)?;
        let out = pipeline::assess(&full, &a, &req.samples, &req.scoring)?;
        Ok(Json(out).into_response())
    })
    .await
}

fn default_window() -> usize {
    1
}

fn default_trials() -> usize {
    1000
}

/// Body of `POST /v1/datasets/{id}/ideal-sites`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdealRequest {
    #[serde(flatten)]
    pub analysis: AnalysisSpec,
    pub n_sites: usize,
    /// Defaults to `n_sites`.
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kind: HistogramKind,
    #[serde(default)]
    pub pick: MemberPick,
    /// Defaults to window coverage.
    #[serde(default)]
    pub mode: Option<ScoreMode>,
    #[serde(default)]
    pub colors: Option<usize>,
}

impl IdealRequest {
    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            n_sites: self.n_sites,
            bins: self.bins.unwrap_or(self.n_sites),
            window: self.window,
            seed: self.seed,
            kind: self.kind,
            pick: self.pick,
        }
    }

    pub fn scoring(&self) -> ScoringParams {
        let mut p = ScoringParams::with_mode(self.mode.unwrap_or(ScoreMode::WindowCoverage));
        if let Some(c) = self.colors {
            p.colors = c;
        }
        p
    }
}

async fn ideal_sites(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    state.snapshot(&id)?;
    let req: IdealRequest = json_body(&headers, &body)?;
    blocking(move || {
        let (full, a) = state.analysis(&id, &req.analysis)?;
        let out = pipeline::ideal_sites(&full, &a, &req.selection(), &req.scoring())?;
        Ok(Json(out).into_response())
    })
    .await
}

/// Body of `POST /v1/datasets/{id}/baseline`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineRequest {
    #[serde(flatten)]
    pub analysis: AnalysisSpec,
    pub n_sites: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// R values to place among the trials.
    #[serde(default)]
    pub supplied: Vec<f64>,
    #[serde(flatten)]
    pub scoring: ScoringParams,
}

impl BaselineRequest {
    pub fn config(&self) -> BaselineConfig {
        BaselineConfig {
            n_sites: self.n_sites,
            trials: self.trials,
            seed: self.seed,
        }
    }
}

async fn baseline(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    state.snapshot(&id)?;
    let req: BaselineRequest = json_body(&headers, &body)?;
    blocking(move || {
        let (_, a) = state.analysis(&id, &req.analysis)?;
        let out = pipeline::baseline(&a, &req.config(), &req.scoring, &req.supplied)?;
        Ok(Json(out).into_response())
    })
    .await
}

fn split_list(s: Option<&String>) -> Vec<String> {
    s.map(|s| {
        s.split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(String::from)
            .collect()
    })
    .unwrap_or_default()
}

/// `GET /v1/datasets/{id}/histogram?variables=a,b&bins=20&kind=equal-width&filters=v:0..1`
async fn histogram(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    state.snapshot(&id)?;
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", m);
    let bins = match q.get("bins") {
        Some(b) => b.parse::<usize>().map_err(|_| bad(format!("bins `{b}` is not a count")))?,
        None => 10,
    };
    let kind = match q.get("kind") {
        Some(k) => k.parse::<HistogramKind>()?,
        None => HistogramKind::EqualWidth,
    };
    let filters = split_list(q.get("filters"))
        .iter()
        .map(|f| f.parse::<FilterPredicate>())
        .collect::<Result<Vec<_>, _>>()?;
    let spec = AnalysisSpec {
        variables: split_list(q.get("variables")),
        filters,
    };
    blocking(move || {
        let (_, a) = state.analysis(&id, &spec)?;
        Ok(Json(a.histogram(bins, kind)?).into_response())
    })
    .await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/datasets", post(upload))
        .route("/v1/datasets/{id}", get(describe).delete(remove))
        .route("/v1/datasets/{id}/representativeness", post(representativeness))
        .route("/v1/datasets/{id}/ideal-sites", post(ideal_sites))
        .route("/v1/datasets/{id}/baseline", post(baseline))
        .route("/v1/datasets/{id}/histogram", get(histogram))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(AppState::new()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
