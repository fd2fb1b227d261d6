//! HTTP service that runs the active-learning loop with a person as the
//! demonstrator.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | `{preset, method, seed?}` | `{id, grid}` |
//! | POST | `/sessions/{id}/query` | | `{xi, scores, remaining}` |
//! | POST | `/sessions/{id}/action` | `{a}` | `{state, terminated, remaining, finished}` |
//! | GET | `/sessions/{id}/posterior` | | `{computing, summary}` |
//! | GET | `/sessions/{id}` | | full session view |
//!
//! Phase violations answer 409, malformed input 400 and unknown sessions 404.
//! Every mutation is appended to a per-session event log that is replayed
//! on start.

pub mod events;
pub mod session;

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Mutex, RwLock};

use events::{replay, Event, EventLog};
use session::{
    query_response, ActionOutcome, ApiError, GridView, Phase, PosteriorView, QueryResponse,
    RefreshJob, Session, SessionView,
};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

fn io_error(e: io::Error) -> ApiError {
    ApiError::Internal(format!("event log: {e}"))
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub data_dir: PathBuf,
    /// Extra wait before each background refresh, to simulate a slow sampler.
    pub refresh_delay: Duration,
}

impl ServiceOptions {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            refresh_delay: Duration::ZERO,
        }
    }
}

struct Handle {
    session: Mutex<Session>,
    /// Bumped whenever a refresh lands.
    refreshed: watch::Sender<u64>,
}

impl Handle {
    fn new(session: Session) -> Arc<Self> {
        Arc::new(Self {
            session: Mutex::new(session),
            refreshed: watch::Sender::new(0),
        })
    }
}

struct Inner {
    sessions: RwLock<HashMap<String, Arc<Handle>>>,
    log: EventLog,
    refresh_delay: Duration,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Open the data directory and rebuild every logged session.
    /// Sessions whose log cannot be replayed are skipped with an error message.
    pub fn open(opts: &ServiceOptions) -> io::Result<Self> {
        let log = EventLog::open(&opts.data_dir)?;
        let mut sessions = HashMap::new();
        for (path, evs) in log.load_all()? {
            match replay(&evs) {
                Ok(s) => {
                    sessions.insert(s.id.clone(), Handle::new(s));
                }
                Err(e) => log::error!("cannot replay {}: {e}", path.display()),
            }
        }
        log::info!("restored {} sessions", sessions.len());
        Ok(Self(Arc::new(Inner {
            sessions: RwLock::new(sessions),
            log,
            refresh_delay: opts.refresh_delay,
        })))
    }

    async fn handle(&self, id: &str) -> Result<Arc<Handle>, ApiError> {
        self.0
            .sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
    }

    fn spawn_refresh(&self, handle: Arc<Handle>, job: RefreshJob) {
        let delay = self.0.refresh_delay;
        tokio::spawn(async move {
            if !delay.is_zero() {
                tokio::time::sleep(delay).await;
            }
            let out = tokio::task::spawn_blocking(move || job.run())
                .await
                .unwrap_or_else(|e| Err(e.to_string()));
            handle.session.lock().await.install(out);
            handle.refreshed.send_modify(|v| *v += 1);
        });
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/query", post(next_query))
        .route("/sessions/{id}/action", post(submit_action))
        .route("/sessions/{id}/posterior", get(get_posterior))
        .with_state(state)
}

/// Serve on `addr` until the process ends.
pub async fn serve(addr: SocketAddr, opts: ServiceOptions) -> io::Result<()> {
    let state = tokio::task::spawn_blocking(move || AppState::open(&opts))
        .await
        .map_err(io::Error::other)??;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

fn body<T>(b: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    b.map(|Json(v)| v)
        .map_err(|e| ApiError::BadRequest(e.body_text()))
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    preset: String,
    method: String,
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub grid: GridView,
}

async fn create_session(
    State(state): State<AppState>,
    req: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let req = body(req)?;
    let uuid = uuid::Uuid::new_v4();
    let id = uuid.simple().to_string();
    let seed = req.seed.unwrap_or(uuid.as_u64_pair().0);
    let (sid, preset, method) = (id.clone(), req.preset.clone(), req.method.clone());
    let session = tokio::task::spawn_blocking(move || Session::create(sid, &preset, &method, seed))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    state
        .0
        .log
        .append(
            &id,
            &Event::Created {
                id: id.clone(),
                preset: req.preset,
                method: session.method().name().to_string(),
                seed,
            },
        )
        .map_err(io_error)?;
    let grid = session.grid();
    state
        .0
        .sessions
        .write()
        .await
        .insert(id.clone(), Handle::new(session));
    log::info!("created session {id}");
    Ok((StatusCode::CREATED, Json(CreateResponse { id, grid })))
}

async fn next_query(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<QueryResponse>, ApiError> {
    let handle = state.handle(&id).await?;
    loop {
        let mut s = handle.session.lock().await;
        if s.phase() == Phase::Computing {
            // Wait for the refresh instead of rejecting the query.
            let mut rx = handle.refreshed.subscribe();
            drop(s);
            rx.changed()
                .await
                .map_err(|e| ApiError::Internal(e.to_string()))?;
            continue;
        }
        let job = s.query_job()?;
        let result = tokio::task::spawn_blocking(move || job.run())
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))?
            .map_err(ApiError::Internal)?;
        let remaining = s.begin_demo(result.chosen)?;
        state
            .0
            .log
            .append(&id, &Event::Query { xi: result.chosen })
            .map_err(io_error)?;
        return Ok(Json(query_response(&result, remaining)));
    }
}

#[derive(Debug, Deserialize)]
struct ActionRequest {
    a: usize,
}

async fn submit_action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    req: Result<Json<ActionRequest>, JsonRejection>,
) -> Result<Json<ActionOutcome>, ApiError> {
    let handle = state.handle(&id).await?;
    let a = body(req)?.a;
    let mut s = handle.session.lock().await;
    let outcome = s.act(a)?;
    let log = &state.0.log;
    log.append(&id, &Event::Action { a }).map_err(io_error)?;
    if outcome.finished {
        log.append(
            &id,
            &Event::Finalized {
                n_demos: s.n_demos(),
            },
        )
        .map_err(io_error)?;
        state.spawn_refresh(Arc::clone(&handle), s.refresh_job());
    }
    Ok(Json(outcome))
}

async fn get_posterior(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<PosteriorView>, ApiError> {
    let handle = state.handle(&id).await?;
    let view = handle.session.lock().await.posterior_view();
    Ok(Json(view))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let handle = state.handle(&id).await?;
    let view = handle.session.lock().await.view();
    Ok(Json(view))
}
