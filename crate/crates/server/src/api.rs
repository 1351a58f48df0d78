//! HTTP API over live sessions.
//!
//! Commands on one session are serialized by a per-session mutex; distinct
//! sessions run concurrently. Finished sessions are snapshotted so their
//! report and events are served without taking the session lock.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

use adaptutor_core::config::EngineConfig;
use adaptutor_core::session::{
    log_path, read_log, Engine, EventBody, JsonlLog, Phase, ResponseInput, Session, SessionError, SessionEvent, SessionReport,
};

pub const MAX_EVENT_PAGE: usize = 1000;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id}"))
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::Finished => (StatusCode::CONFLICT, "finished"),
            SessionError::NoPendingItem => (StatusCode::CONFLICT, "no_pending_item"),
            SessionError::ItemMismatch { .. } | SessionError::ConstructMismatch { .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "mismatch")
            }
            SessionError::InvalidAnswer(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_answer"),
            SessionError::Config(_) => (StatusCode::BAD_REQUEST, "invalid_config"),
            SessionError::Corruption(_) | SessionError::LogParse { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "corrupt_log")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Completed {
    report: SessionReport,
    events: Vec<SessionEvent>,
}

pub struct AppState {
    base: EngineConfig,
    engine: Arc<Engine>,
    data_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    completed: RwLock<HashMap<String, Arc<Completed>>>,
    counter: AtomicU64,
}

impl AppState {
    /// `data_dir` holds one JSONL log per session; `None` keeps sessions in memory.
    pub fn new(base: EngineConfig, data_dir: Option<PathBuf>) -> Result<Self, SessionError> {
        let engine = Arc::new(Engine::new(base.clone())?);
        if let Some(dir) = &data_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self {
            base,
            engine,
            data_dir,
            sessions: RwLock::new(HashMap::new()),
            completed: RwLock::new(HashMap::new()),
            counter: AtomicU64::new(1),
        })
    }

    fn fresh_id(&self) -> String {
        loop {
            let id = format!("s{:06}", self.counter.fetch_add(1, Ordering::Relaxed));
            let on_disk = self.data_dir.as_ref().is_some_and(|d| log_path(d, &id).exists());
            if !on_disk && !self.sessions.read().unwrap().contains_key(&id) {
                return id;
            }
        }
    }

    /// Live session by id, reloading it from its log when not in memory.
    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        if let Some(s) = self.sessions.read().unwrap().get(id) {
            return Ok(Arc::clone(s));
        }
        let valid = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        let path = match &self.data_dir {
            Some(dir) if valid => log_path(dir, id),
            _ => return Err(ApiError::not_found(id)),
        };
        if !path.exists() {
            return Err(ApiError::not_found(id));
        }
        let events = read_log(&path)?;
        let written = events.len();
        let shares_base = matches!(events.first().map(|e| &e.body), Some(EventBody::Created { config, .. }) if **config == self.base);
        let session = if shares_base {
            Session::resume(Arc::clone(&self.engine), events)?
        } else {
            Session::replay(events)?
        };
        let session = session.with_log(JsonlLog::open_append(&path, written)?)?;
        let mut map = self.sessions.write().unwrap();
        let entry = map.entry(id.to_string()).or_insert_with(|| Arc::new(Mutex::new(session)));
        Ok(Arc::clone(entry))
    }

    fn completed(&self, id: &str) -> Option<Arc<Completed>> {
        self.completed.read().unwrap().get(id).cloned()
    }

    fn note_if_done(&self, session: &Session) {
        if session.phase() == Phase::Done {
            let snap = Completed { report: session.report(), events: session.events().to_vec() };
            self.completed.write().unwrap().insert(session.id().to_string(), Arc::new(snap));
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_step))
        .route("/sessions/{id}/responses", post(submit_response))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    #[serde(default)]
    config: Option<serde_json::Value>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Created {
    session_id: String,
    seed: u64,
    phase: Phase,
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))
}

fn default_seed() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64)
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Created>)> {
    let req: CreateRequest = parse_body(&body)?;
    let engine = match &req.config {
        None => Arc::clone(&app.engine),
        Some(overrides) => {
            let cfg = app.base.with_overrides(overrides).map_err(SessionError::from)?;
            Arc::new(Engine::new(cfg)?)
        }
    };
    let seed = req.seed.unwrap_or_else(default_seed);
    let id = app.fresh_id();
    let mut session = Session::create(engine, &id, seed)?;
    if let Some(dir) = &app.data_dir {
        session = session.with_log(JsonlLog::create(log_path(dir, &id))?)?;
    }
    let phase = session.phase();
    app.sessions.write().unwrap().insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(Created { session_id: id, seed, phase })))
}

async fn next_step(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let handle = app.session(&id)?;
    let mut session = handle.lock().await;
    let result = session.next_step();
    app.note_if_done(&session);
    Ok(Json(result?).into_response())
}

async fn submit_response(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let input: ResponseInput =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))?;
    let handle = app.session(&id)?;
    let mut session = handle.lock().await;
    let result = session.submit_response(&input);
    app.note_if_done(&session);
    Ok(Json(result?).into_response())
}

async fn report(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionReport>> {
    if let Some(done) = app.completed(&id) {
        return Ok(Json(done.report.clone()));
    }
    let handle = app.session(&id)?;
    let session = handle.lock().await;
    Ok(Json(session.report()))
}

#[derive(Debug, Deserialize)]
struct EventQuery {
    #[serde(default)]
    from: u64,
    #[serde(default)]
    limit: Option<usize>,
}

#[derive(Debug, Serialize)]
struct EventPage<'a> {
    from: u64,
    next: u64,
    total: usize,
    events: &'a [SessionEvent],
}

fn page(events: &[SessionEvent], q: &EventQuery) -> Response {
    let start = usize::try_from(q.from).unwrap_or(usize::MAX).min(events.len());
    let limit = q.limit.unwrap_or(MAX_EVENT_PAGE).min(MAX_EVENT_PAGE);
    let slice = &events[start..(start + limit).min(events.len())];
    Json(EventPage { from: start as u64, next: (start + slice.len()) as u64, total: events.len(), events: slice })
        .into_response()
}

async fn events(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<EventQuery>,
) -> ApiResult<Response> {
    if let Some(done) = app.completed(&id) {
        return Ok(page(&done.events, &q));
    }
    let handle = app.session(&id)?;
    let session = handle.lock().await;
    Ok(page(session.events(), &q))
}
