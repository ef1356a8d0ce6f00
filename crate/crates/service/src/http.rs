//! Routes:
//!
//! | method | path | body / query |
//! |---|---|---|
//! | GET  | `/health` | |
//! | GET  | `/recordings` | |
//! | POST | `/recordings` | JSON `{log, screen?, meta?}` or raw CSV with `?screen=WxH` |
//! | GET  | `/recordings/{id}` | |
//! | GET  | `/recordings/{id}/log` | |
//! | POST | `/recordings/{id}/analyses` | JSON `{kind, params?}` |
//! | GET  | `/analyses/{job}` | |
//! | GET  | `/analyses/{job}/artifact` | |
//! | GET  | `/recordings/{id}/layers/{heatmap,gazeplot,scatter}` | `window=t0,t1&low=RRGGBB&high=RRGGBB&sigma=&opacity=&dispersion=&min_dur=&max_gap=` |
//! | GET  | `/recordings/{id}/fixations` | `dispersion=&min_dur=&max_gap=&format=json\|csv` |
//! | GET  | `/ui/*` | static explorer assets |
//!
//! Errors are `{"error": {code, message, module, field?}}` with a 4xx/5xx
//! status. Analysis responses carry `x-gazekit-cache: hit|miss`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gazekit::fixation::FixationConfig;
use gazekit::ingest::ScreenSpec;
use gazekit::render::LayerKind;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::analysis::{AnalysisKind, AnalysisParams, FixateResult};
use crate::error::ApiError;
use crate::workspace::{AnalysisJob, JobOutcome, Workspace};

pub const CACHE_HEADER: &str = "x-gazekit-cache";

pub struct AppState {
    pub workspace: Workspace,
    pub ui_dir: Option<PathBuf>,
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    let ui = state.ui_dir.clone();
    let mut app = Router::new()
        .route(
            "/health",
            get(|| async { Json(serde_json::json!({ "status": "ok" })) }),
        )
        .route("/recordings", get(list_recordings).post(upload))
        .route("/recordings/{id}", get(get_recording))
        .route("/recordings/{id}/log", get(get_log))
        .route("/recordings/{id}/analyses", post(run_analysis))
        .route("/recordings/{id}/layers/{kind}", get(get_layer))
        .route("/recordings/{id}/fixations", get(get_fixations))
        .route("/analyses/{job}", get(get_job))
        .route("/analyses/{job}/artifact", get(get_artifact));
    app = match ui {
        Some(dir) => app.nest_service("/ui", ServeDir::new(dir)),
        None => app
            .route("/ui", get(no_ui))
            .route("/ui/{*rest}", get(no_ui)),
    };
    app.fallback(|| async { ApiError::not_found("route", "") })
        .with_state(state)
}

async fn no_ui() -> ApiError {
    ApiError::not_found("explorer UI assets", "/ui (start the server with --ui-dir)")
}

/// Runs blocking workspace work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Storage(format!("worker panicked: {e}")))?
}

async fn list_recordings(State(s): State<Shared>) -> Response {
    Json(s.workspace.recordings()).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UploadBody {
    log: String,
    screen: Option<String>,
    /// Trial metadata as a JSON object or as its text.
    meta: Option<serde_json::Value>,
}

fn parse_screen(raw: &str) -> Result<ScreenSpec, ApiError> {
    raw.parse::<ScreenSpec>().map_err(|e| match e {
        e @ gazekit::ingest::IngestError::InvalidScreen { .. } => e.into(),
        e => ApiError::validation(Some("screen".into()), e.to_string()),
    })
}

async fn upload(
    State(s): State<Shared>,
    Query(q): Query<BTreeMap<String, String>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let (log, screen, meta) = if is_json {
        let mut de = serde_json::Deserializer::from_slice(&body);
        let b: UploadBody = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            ApiError::validation(Some(e.path().to_string()), e.into_inner().to_string())
        })?;
        let meta = match b.meta {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::String(text)) => Some(text),
            Some(doc) => Some(doc.to_string()),
        };
        (b.log, b.screen.or_else(|| q.get("screen").cloned()), meta)
    } else {
        let log = String::from_utf8(body.to_vec())
            .map_err(|_| ApiError::validation(None, "gaze log must be UTF-8"))?;
        (log, q.get("screen").cloned(), None)
    };
    let screen = screen.as_deref().map(parse_screen).transpose()?;
    let receipt = blocking(move || s.workspace.upload(&log, screen, meta.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(receipt)).into_response())
}

async fn get_recording(
    State(s): State<Shared>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let rec = blocking(move || s.workspace.recording(&id)).await?;
    Ok(Json(rec).into_response())
}

async fn get_log(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let log = blocking(move || s.workspace.raw_log(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], log).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisRequest {
    kind: AnalysisKind,
    #[serde(default)]
    params: serde_json::Value,
}

/// A job plus its JSON output, when it has one.
#[derive(Serialize)]
struct JobView {
    #[serde(flatten)]
    job: AnalysisJob,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<serde_json::Value>,
}

fn job_view(ws: &Workspace, job: AnalysisJob) -> Result<JobView, ApiError> {
    let output = match job.content_type.as_deref() {
        Some("application/json") => {
            let bytes = ws.artifact(&job)?;
            Some(serde_json::from_slice(&bytes).map_err(|e| ApiError::Storage(e.to_string()))?)
        }
        _ => None,
    };
    Ok(JobView { job, output })
}

fn cache_header(cached: bool) -> [(&'static str, HeaderValue); 1] {
    [(
        CACHE_HEADER,
        HeaderValue::from_static(if cached { "hit" } else { "miss" }),
    )]
}

async fn run_analysis(
    State(s): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(&body);
    let req: AnalysisRequest = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        ApiError::validation(Some(e.path().to_string()), e.into_inner().to_string())
    })?;
    let (view, cached) = blocking(move || {
        let JobOutcome { job, cached } = s.workspace.run_analysis(&id, req.kind, req.params)?;
        Ok((job_view(&s.workspace, job)?, cached))
    })
    .await?;
    Ok((cache_header(cached), Json(view)).into_response())
}

async fn get_job(State(s): State<Shared>, Path(job): Path<String>) -> Result<Response, ApiError> {
    let view = blocking(move || {
        let job = s.workspace.job(&job)?;
        job_view(&s.workspace, job)
    })
    .await?;
    Ok(Json(view).into_response())
}

fn binary(content_type: Option<&str>, bytes: Vec<u8>) -> Response {
    let ct = content_type
        .unwrap_or("application/octet-stream")
        .to_string();
    ([(header::CONTENT_TYPE, ct)], bytes).into_response()
}

async fn get_artifact(
    State(s): State<Shared>,
    Path(job): Path<String>,
) -> Result<Response, ApiError> {
    let (job, bytes) = blocking(move || {
        let job = s.workspace.job(&job)?;
        if let Some(err) = &job.error {
            return Err(ApiError::Replay(err.clone()));
        }
        let bytes = s.workspace.artifact(&job)?;
        Ok((job, bytes))
    })
    .await?;
    Ok(binary(job.content_type.as_deref(), bytes))
}

fn number<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, ApiError> {
    raw.trim().parse().map_err(|_| {
        ApiError::validation(
            Some(key.to_string()),
            format!("{raw:?} is not a valid number"),
        )
    })
}

/// Applies `dispersion`, `min_dur` and `max_gap` from the query, if present.
fn fixation_from_query(q: &mut BTreeMap<String, String>) -> Result<FixationConfig, ApiError> {
    let mut cfg = FixationConfig::default();
    if let Some(v) = q.remove("dispersion") {
        cfg.dispersion_px = number("dispersion", &v)?;
    }
    if let Some(v) = q.remove("min_dur") {
        cfg.min_duration_ms = number("min_dur", &v)?;
    }
    if let Some(v) = q.remove("max_gap") {
        cfg.max_gap_ms = number("max_gap", &v)?;
    }
    Ok(cfg)
}

fn reject_leftovers(q: &BTreeMap<String, String>) -> Result<(), ApiError> {
    match q.keys().next() {
        Some(k) => Err(ApiError::validation(
            Some(k.clone()),
            format!("unknown query parameter {k:?}"),
        )),
        None => Ok(()),
    }
}

/// Builds render parameters from layer-route query parameters.
pub fn render_params_from_query(
    kind: &str,
    mut q: BTreeMap<String, String>,
) -> Result<AnalysisParams, ApiError> {
    let layer: LayerKind = kind
        .parse()
        .map_err(|e: String| ApiError::validation(Some("layer".into()), e))?;
    let fixation = fixation_from_query(&mut q)?;
    let mut params = serde_json::Map::new();
    params.insert(
        "layer".into(),
        serde_json::to_value(layer).expect("layer serializes"),
    );
    params.insert(
        "fixation".into(),
        serde_json::to_value(fixation).expect("config serializes"),
    );
    if let Some(w) = q.remove("window") {
        let parts: Vec<&str> = w.split(',').collect();
        let [t0, t1] = parts[..] else {
            return Err(ApiError::validation(
                Some("window".into()),
                format!("{w:?} is not t0,t1"),
            ));
        };
        let (t0, t1): (f64, f64) = (number("window", t0)?, number("window", t1)?);
        params.insert("window".into(), serde_json::json!([t0, t1]));
    }
    for key in ["low", "high"] {
        if let Some(v) = q.remove(key) {
            params.insert(key.into(), v.into());
        }
    }
    for (query_key, field) in [("sigma", "kernel_sigma_px"), ("opacity", "opacity")] {
        if let Some(v) = q.remove(query_key) {
            params.insert(field.into(), number::<f64>(query_key, &v)?.into());
        }
    }
    reject_leftovers(&q)?;
    AnalysisParams::parse(AnalysisKind::Render, serde_json::Value::Object(params))
}

async fn get_layer(
    State(s): State<Shared>,
    Path((id, kind)): Path<(String, String)>,
    Query(q): Query<BTreeMap<String, String>>,
) -> Result<Response, ApiError> {
    let (outcome_job, bytes, cached) = blocking(move || {
        s.workspace.recording_entry(&id)?;
        let params = render_params_from_query(&kind, q)?;
        let outcome = s.workspace.run_parsed(&id, &params)?;
        if let Some(err) = &outcome.job.error {
            return Err(ApiError::Replay(err.clone()));
        }
        let bytes = s.workspace.artifact(&outcome.job)?;
        Ok((outcome.job, bytes, outcome.cached))
    })
    .await?;
    let mut resp = binary(outcome_job.content_type.as_deref(), bytes);
    resp.headers_mut()
        .extend(cache_header(cached).map(|(k, v)| (header::HeaderName::from_static(k), v)));
    Ok(resp)
}

async fn get_fixations(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(mut q): Query<BTreeMap<String, String>>,
) -> Result<Response, ApiError> {
    let cfg = fixation_from_query(&mut q)?;
    let format = q.remove("format").unwrap_or_else(|| "json".into());
    if format != "json" && format != "csv" {
        return Err(ApiError::validation(
            Some("format".into()),
            "expected json or csv",
        ));
    }
    reject_leftovers(&q)?;
    let bytes = blocking(move || {
        s.workspace.recording_entry(&id)?;
        let (_, bytes) = s
            .workspace
            .run_to_artifact(&id, &AnalysisParams::Fixate(cfg))?;
        Ok(bytes)
    })
    .await?;
    if format == "csv" {
        let doc: FixateResult =
            serde_json::from_slice(&bytes).map_err(|e| ApiError::Storage(e.to_string()))?;
        let fx: Vec<_> = doc.fixations.iter().map(|f| f.fixation).collect();
        let csv = gazekit::ingest::export_fixations(&fx);
        return Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response());
    }
    Ok(binary(Some("application/json"), bytes))
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!(
        "gazekit: serving {} on http://{}",
        state.workspace.root().display(),
        listener.local_addr()?
    );
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Serves on an ephemeral localhost port in the background; returns the
/// bound address.
pub async fn spawn_local(state: AppState) -> std::io::Result<SocketAddr> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", 0)).await?;
    let addr = listener.local_addr()?;
    let app = router(Arc::new(state));
    tokio::spawn(async move {
        let _ = axum::serve(listener, app).await;
    });
    Ok(addr)
}
