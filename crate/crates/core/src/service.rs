//! JSON-over-HTTP access to the pipeline, the backend of the operator UI.
//!
//! Routes:
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | GET | `/api/health` | | `{"status":"ok"}` |
//! | POST | `/api/parse` | `{"rules": "..."}` | `{"ok":true,"queries":[...]}` or 422 with diagnostics |
//! | POST | `/api/pml` | [`PmlRequest`] | landscape JSON, or 202 with a job id for large grids |
//! | GET | `/api/pml/{job}` | | job status, with the landscape once done |
//! | DELETE | `/api/pml/{job}` | | cancels the job |
//!
//! Bodies that are not valid JSON for the route get 400; rule text that does
//! not parse gets 422 with `{line, column, message}` diagnostics.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::hplp::{parse_program, InferenceMode, InferenceParams, DEFAULT_SAMPLE_COUNT};
use crate::ingest::FeatureTypeMapping;
use crate::landscape::{ComputeOptions, MissionLandscape};
use crate::pcm::GridSpec;
use crate::pipeline::{compute_landscape, ClauseCache, MissionInputs, DEFAULT_ENSEMBLE_SIZE};
use crate::scenario::fixtures_dir;
use crate::uncertainty::AffineErrorModel;

/// Grids up to this many cells are answered synchronously.
pub const SYNC_CELL_LIMIT: usize = 200 * 200;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Where `map_ref` names are looked up, as `<name>.geojson` or
    /// `<name>/map.geojson`.
    pub map_dir: PathBuf,
    pub sync_cell_limit: usize,
    pub workers: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            map_dir: fixtures_dir(),
            sync_cell_limit: SYNC_CELL_LIMIT,
            workers: None,
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmlParams {
    #[serde(default = "default_samples")]
    pub sample_count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: InferenceMode,
    #[serde(default = "default_ensemble")]
    pub n_ensemble: usize,
    #[serde(default)]
    pub tiling: u32,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLE_COUNT
}

fn default_ensemble() -> usize {
    DEFAULT_ENSEMBLE_SIZE
}

impl Default for PmlParams {
    fn default() -> Self {
        PmlParams {
            sample_count: DEFAULT_SAMPLE_COUNT,
            seed: 0,
            mode: InferenceMode::Sampling,
            n_ensemble: DEFAULT_ENSEMBLE_SIZE,
            tiling: 0,
        }
    }
}

/// Body of `POST /api/pml`. Exactly one of `map_ref` and `geojson` is set;
/// the other fields use the same shapes as the mapping, error-model and grid
/// files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmlRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geojson: Option<Value>,
    pub mapping: Value,
    pub error_model: Value,
    pub rules: String,
    pub grid: GridSpec,
    #[serde(default)]
    pub params: PmlParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParseRequest {
    rules: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

struct Job {
    status: JobStatus,
    total: usize,
    progress: Arc<AtomicUsize>,
    cancel: Arc<AtomicBool>,
    result: Option<MissionLandscape>,
    error: Option<String>,
}

impl Job {
    fn view(&self, id: u64) -> Value {
        let mut v = json!({
            "job": id,
            "status": self.status,
            "progress": self.progress.load(Ordering::Relaxed),
            "total": self.total,
        });
        if let Some(e) = &self.error {
            v["error"] = json!(e);
        }
        if let Some(l) = &self.result {
            v["result"] = serde_json::to_value(l).expect("landscape serializes");
        }
        v
    }
}

struct AppState {
    config: ServiceConfig,
    cache: Option<ClauseCache>,
    jobs: Mutex<HashMap<u64, Job>>,
    next_job: AtomicU64,
}

type Shared = Arc<AppState>;

/// The API as a router, for embedding or for in-process tests.
pub fn router(config: ServiceConfig) -> Result<Router> {
    let cache = config.cache_dir.as_ref().map(ClauseCache::new).transpose()?;
    let state = Arc::new(AppState {
        config,
        cache,
        jobs: Mutex::new(HashMap::new()),
        next_job: AtomicU64::new(1),
    });
    Ok(Router::new()
        .route("/api/health", get(health))
        .route("/api/parse", post(parse))
        .route("/api/pml", post(pml))
        .route("/api/pml/{job}", get(job_status).delete(cancel_job))
        .with_state(state))
}

/// Serves the API until the process is stopped.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<()> {
    let app = router(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

fn reply(status: StatusCode, body: Value) -> Response {
    (status, Json(body)).into_response()
}

fn bad_request(message: impl Into<String>) -> Response {
    reply(StatusCode::BAD_REQUEST, json!({"ok": false, "error": message.into()}))
}

fn root_cause(e: &Error) -> &Error {
    match e {
        Error::Stage { source, .. } | Error::Cell { source, .. } => root_cause(source),
        e => e,
    }
}

fn error_response(e: &Error) -> Response {
    if let Some(d) = e.diagnostics() {
        return reply(StatusCode::UNPROCESSABLE_ENTITY, json!({"ok": false, "diagnostics": d}));
    }
    let status = match root_cause(e) {
        Error::UnknownAtom(_) | Error::Unsupported(_) | Error::Evaluation { .. } | Error::Capacity { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        Error::Config(_) | Error::Domain(_) | Error::GeoJson(_) | Error::Json(_) => StatusCode::BAD_REQUEST,
        Error::Http { .. } => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    reply(status, json!({"ok": false, "error": e.to_string()}))
}

fn body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> std::result::Result<T, Response> {
    serde_json::from_slice(bytes).map_err(|e| bad_request(format!("malformed request body: {e}")))
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

/// Query heads without spaces, e.g. `landscape(R,C)`.
fn compact(atom: &crate::hplp::Atom) -> String {
    if atom.args.is_empty() {
        return atom.name.clone();
    }
    let args: Vec<String> = atom.args.iter().map(|a| a.to_string()).collect();
    format!("{}({})", atom.name, args.join(","))
}

async fn parse(bytes: Bytes) -> Response {
    let req: ParseRequest = match body(&bytes) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    match parse_program(&req.rules) {
        Ok(p) => {
            let queries: Vec<String> = p.queries().map(compact).collect();
            reply(StatusCode::OK, json!({"ok": true, "queries": queries}))
        }
        Err(e) => error_response(&e),
    }
}

fn resolve_map(config: &ServiceConfig, name: &str) -> Result<String> {
    let safe = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if !safe {
        return Err(Error::config(format!("map_ref `{name}` must be a plain name")));
    }
    let candidates = [
        config.map_dir.join(format!("{name}.geojson")),
        config.map_dir.join(name).join("map.geojson"),
    ];
    let path = candidates
        .iter()
        .find(|p| p.is_file())
        .ok_or_else(|| Error::config(format!("unknown map_ref `{name}`")))?;
    Ok(std::fs::read_to_string(path)?)
}

/// Turns a request into pipeline inputs, exactly as the CLI would from files.
pub fn request_inputs(config: &ServiceConfig, req: &PmlRequest) -> Result<MissionInputs> {
    let geojson = match (&req.map_ref, &req.geojson) {
        (Some(name), None) => resolve_map(config, name)?,
        (None, Some(doc)) => doc.to_string(),
        _ => return Err(Error::config("give exactly one of `map_ref` and `geojson`")),
    };
    let p = req.params;
    let inputs = MissionInputs {
        geojson,
        mapping: FeatureTypeMapping::from_json(&req.mapping.to_string())?,
        error_model: AffineErrorModel::from_json(&req.error_model.to_string())?,
        rules: parse_program(&req.rules)?,
        grid: req.grid,
        n_ensemble: p.n_ensemble,
        params: InferenceParams {
            sample_count: p.sample_count,
            seed: p.seed,
            mode: p.mode,
        },
        tiling: p.tiling,
    };
    inputs.validate()?;
    Ok(inputs)
}

async fn pml(State(state): State<Shared>, bytes: Bytes) -> Response {
    let req: PmlRequest = match body(&bytes) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let inputs = match request_inputs(&state.config, &req) {
        Ok(i) => i,
        Err(e) => return error_response(&e),
    };
    let cells = inputs.grid.cell_count();
    let mut options = ComputeOptions {
        workers: state.config.workers,
        ..Default::default()
    };

    if cells <= state.config.sync_cell_limit {
        let st = state.clone();
        let done = tokio::task::spawn_blocking(move || compute_landscape(&inputs, &options, st.cache.as_ref())).await;
        return match done {
            Ok(Ok(l)) => ([(header::CONTENT_TYPE, "application/json")], l.to_json()).into_response(),
            Ok(Err(e)) => error_response(&e),
            Err(e) => reply(StatusCode::INTERNAL_SERVER_ERROR, json!({"ok": false, "error": e.to_string()})),
        };
    }

    let id = state.next_job.fetch_add(1, Ordering::Relaxed);
    let progress = Arc::new(AtomicUsize::new(0));
    let cancel = Arc::new(AtomicBool::new(false));
    options.progress = Some(progress.clone());
    options.cancel = Some(cancel.clone());
    state.jobs.lock().unwrap().insert(
        id,
        Job {
            status: JobStatus::Queued,
            total: cells,
            progress,
            cancel,
            result: None,
            error: None,
        },
    );
    let st = state.clone();
    tokio::task::spawn_blocking(move || {
        let update = |f: &dyn Fn(&mut Job)| {
            if let Some(j) = st.jobs.lock().unwrap().get_mut(&id) {
                f(j)
            }
        };
        update(&|j| {
            if j.status == JobStatus::Queued {
                j.status = JobStatus::Running
            }
        });
        let out = compute_landscape(&inputs, &options, st.cache.as_ref());
        let mut jobs = st.jobs.lock().unwrap();
        let Some(j) = jobs.get_mut(&id) else { return };
        match out {
            Ok(l) => {
                j.status = JobStatus::Done;
                j.result = Some(l);
            }
            Err(e) if matches!(root_cause(&e), Error::Cancelled) => j.status = JobStatus::Cancelled,
            Err(e) => {
                j.status = JobStatus::Failed;
                j.error = Some(e.to_string());
            }
        }
    });
    (
        StatusCode::ACCEPTED,
        [(header::LOCATION, format!("/api/pml/{id}"))],
        Json(json!({"job": id, "status": JobStatus::Queued, "total": cells})),
    )
        .into_response()
}

async fn job_status(State(state): State<Shared>, Path(id): Path<u64>) -> Response {
    match state.jobs.lock().unwrap().get(&id) {
        Some(j) => reply(StatusCode::OK, j.view(id)),
        None => reply(StatusCode::NOT_FOUND, json!({"ok": false, "error": format!("no job {id}")})),
    }
}

async fn cancel_job(State(state): State<Shared>, Path(id): Path<u64>) -> Response {
    match state.jobs.lock().unwrap().get_mut(&id) {
        Some(j) => {
            j.cancel.store(true, Ordering::Relaxed);
            if matches!(j.status, JobStatus::Queued | JobStatus::Running) {
                j.status = JobStatus::Cancelled;
            }
            reply(StatusCode::OK, j.view(id))
        }
        None => reply(StatusCode::NOT_FOUND, json!({"ok": false, "error": format!("no job {id}")})),
    }
}
