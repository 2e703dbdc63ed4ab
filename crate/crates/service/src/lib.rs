//! HTTP service for the fulfillment copilot: chat, plan inspection and
//! session logs over one shared model/plan state.

pub mod cli;
pub mod session;

use std::sync::{Arc, Mutex, PoisonError, RwLock, TryLockError};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router as HttpRouter};
use fulfil_core::{Hosts, Plan, SolveOutcome};
use fulfil_lm::router::Routed;
use fulfil_lm::{Answer, AnswerKind, BackendError, Router, TokenUsage};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tracing::{info, warn};

pub use session::{InteractionLogEntry, Route, Session, SessionError, SessionStore};

/// Shared state behind every handler.
///
/// All writes to the model and plan store go through `writer`. After each
/// write a copy is published to `snapshot`, which read-only work clones
/// instead of waiting on the writer.
pub struct AppState {
    router: Router,
    writer: Mutex<Hosts>,
    snapshot: RwLock<Arc<Hosts>>,
    sessions: SessionStore,
    instance_name: String,
}

/// Outcome of one query before it is logged.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub route: Route,
    pub answer: Answer,
    pub plan_version_before: u64,
    pub plan_version_after: u64,
}

impl AppState {
    pub fn new(router: Router, hosts: Hosts, sessions: SessionStore) -> Self {
        AppState {
            router,
            instance_name: hosts.instance().name.clone(),
            snapshot: RwLock::new(Arc::new(hosts.clone())),
            writer: Mutex::new(hosts),
            sessions,
        }
    }

    pub fn router(&self) -> &Router {
        &self.router
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    pub fn instance_name(&self) -> &str {
        &self.instance_name
    }

    /// State as of the last completed write.
    pub fn hosts(&self) -> Arc<Hosts> {
        self.snapshot.read().unwrap_or_else(PoisonError::into_inner).clone()
    }

    fn publish(&self, hosts: &Hosts) {
        *self.snapshot.write().unwrap_or_else(PoisonError::into_inner) = Arc::new(hosts.clone());
    }

    /// Routes and executes one query. Snippets that can mutate run under the
    /// writer lock and leave no scenario constraints behind; the rest run on
    /// a private copy of the latest snapshot. Only transport failures are
    /// returned as errors.
    pub fn run_query(&self, query: &str) -> Result<Turn, BackendError> {
        let routed = match self.router.route(query) {
            Ok(r) => r,
            Err(e) if e.is_transport() => return Err(e),
            Err(e) => {
                let version = self.hosts().plans.version();
                return Ok(Turn {
                    route: Route::OutOfDomain,
                    answer: failed_answer(e.to_string()),
                    plan_version_before: version,
                    plan_version_after: version,
                });
            }
        };
        let route = if routed.decision.in_domain {
            Route::InDomain
        } else {
            Route::OutOfDomain
        };
        let (answer, before, after) = if routed.may_mutate() {
            self.execute_locked(routed)
        } else {
            let mut hosts = Hosts::clone(&self.hosts());
            let version = hosts.plans.version();
            (self.router.execute(routed, &mut hosts.env()), version, version)
        };
        Ok(Turn {
            route,
            answer,
            plan_version_before: before,
            plan_version_after: after,
        })
    }

    fn execute_locked(&self, routed: Routed) -> (Answer, u64, u64) {
        let mut hosts = self.writer.lock().unwrap_or_else(PoisonError::into_inner);
        let before = hosts.plans.version();
        let answer = self.router.execute(routed, &mut hosts.env());
        hosts.model.reset();
        let after = hosts.plans.version();
        self.publish(&hosts);
        (answer, before, after)
    }

    /// Runs `f` with exclusive access to the hosts, then publishes the result.
    /// Chats that may mutate wait meanwhile; `optimize` reports a conflict.
    pub fn with_writer<R>(&self, f: impl FnOnce(&mut Hosts) -> R) -> R {
        let mut hosts = self.writer.lock().unwrap_or_else(PoisonError::into_inner);
        let out = f(&mut hosts);
        self.publish(&hosts);
        out
    }

    /// Baseline solve without committing. `Conflict` when a write is running.
    pub fn optimize(&self) -> Result<SolveOutcome, ApiError> {
        let mut hosts = match self.writer.try_lock() {
            Ok(h) => h,
            Err(TryLockError::WouldBlock) => {
                return Err(ApiError::Conflict("another model update is in progress".into()));
            }
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
        };
        let outcome = hosts
            .model
            .optimize()
            .map_err(|e| ApiError::Internal(e.to_string()))?
            .clone();
        self.publish(&hosts);
        Ok(outcome)
    }
}

fn failed_answer(detail: String) -> Answer {
    Answer {
        kind: AnswerKind::ExecutionFailure,
        logs: Vec::new(),
        snippet: None,
        task_id: None,
        usage: TokenUsage::default(),
        gate_usage: TokenUsage::default(),
        coder_usage: TokenUsage::default(),
        error_detail: Some(detail),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unavailable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(serde_json::json!({ "error": self.to_string() }));
        (self.status(), body).into_response()
    }
}

impl From<tokio::task::JoinError> for ApiError {
    fn from(e: tokio::task::JoinError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    pub query: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatResponse {
    pub session_id: String,
    pub answer: Answer,
    pub entry: InteractionLogEntry,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub instance: String,
    pub backend: String,
}

/// CORS for the planner UI: the given origin, or any origin when absent.
pub fn cors_layer(ui_origin: Option<&str>) -> anyhow::Result<CorsLayer> {
    let origin = match ui_origin {
        Some(o) => AllowOrigin::exact(HeaderValue::from_str(o)?),
        None => AllowOrigin::from(Any),
    };
    Ok(CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any))
}

pub fn app(state: Arc<AppState>, cors: CorsLayer) -> HttpRouter {
    HttpRouter::new()
        .route("/chat", post(chat))
        .route("/plan", get(current_plan))
        .route("/plan/optimize", post(optimize))
        .route("/sessions/{id}/log", get(session_log))
        .route("/health", get(health))
        .layer(cors)
        .with_state(state)
}

async fn chat(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<ChatResponse>, ApiError> {
    let started = Instant::now();
    let req: ChatRequest = serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))?;
    if req.query.trim().is_empty() {
        return Err(ApiError::BadRequest("query is empty".into()));
    }
    let session_id = match req.session_id {
        Some(id) if session::valid_session_id(&id) => id,
        Some(id) => return Err(ApiError::BadRequest(SessionError::BadId(id).to_string())),
        None => SessionStore::new_id(),
    };
    let query = req.query;
    let worker = state.clone();
    let q = query.clone();
    let turn = tokio::task::spawn_blocking(move || worker.run_query(&q))
        .await?
        .map_err(|e| {
            warn!(error = %e, "backend unreachable");
            ApiError::Unavailable(e.to_string())
        })?;
    let entry = InteractionLogEntry {
        seq: 0,
        timestamp: chrono::Utc::now(),
        query,
        route: turn.route,
        kind: turn.answer.kind,
        snippet: turn.answer.snippet.clone(),
        logs: turn.answer.logs.clone(),
        usage: turn.answer.usage,
        latency_ms: started.elapsed().as_millis() as u64,
        plan_version_before: turn.plan_version_before,
        plan_version_after: turn.plan_version_after,
    };
    let entry = state.sessions.append(&session_id, entry);
    info!(session = %session_id, seq = entry.seq, kind = ?entry.kind, latency_ms = entry.latency_ms, "chat");
    Ok(Json(ChatResponse {
        session_id,
        answer: turn.answer,
        entry,
    }))
}

async fn current_plan(State(state): State<Arc<AppState>>) -> Result<Json<Plan>, ApiError> {
    state
        .hosts()
        .plans
        .current
        .clone()
        .map(Json)
        .ok_or_else(|| ApiError::NotFound("no plan has been committed".into()))
}

async fn optimize(State(state): State<Arc<AppState>>) -> Result<Json<SolveOutcome>, ApiError> {
    let outcome = tokio::task::spawn_blocking(move || state.optimize()).await??;
    Ok(Json(outcome))
}

async fn session_log(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<Vec<InteractionLogEntry>>, ApiError> {
    state
        .sessions
        .entries(&id)
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("unknown session {id}")))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        instance: state.instance_name.clone(),
        backend: state.router.backend().kind().into(),
    })
}
