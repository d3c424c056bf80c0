//! Local HTTP API consumed by the review UI.
//!
//! ```text
//! GET  /api/queue?pass=<1|2>&limit=<n>   review queue items
//! GET  /api/entries/{id}                 entry plus pending proposed fills
//! POST /api/entries/{id}/decision        {pass, action, corrections, reviewer}
//! GET  /api/stats                        per-state, flag and per-source counts
//! ```
//!
//! Errors are `{code, message}` with status 404 (unknown entry), 409
//! (decision not allowed in the entry's state) or 422 (malformed or
//! invalid decision). Mutations are serialized by one project mutex.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use super::{
    apply_decision, review_queue, stats, Action, Corrections, Decision, DecisionError, Pass,
};
use crate::model::LexemeEntry;
use crate::relations::{propagate_fields, ProposedFill};
use crate::store::Project;

pub const DEFAULT_PORT: u16 = 7311;
const DEFAULT_LIMIT: usize = 50;

/// Shared server state.
#[derive(Clone)]
pub struct ApiState {
    project: Arc<Mutex<Project>>,
    /// Used when a decision body names no reviewer.
    default_reviewer: String,
}

impl ApiState {
    pub fn new(project: Project, default_reviewer: impl Into<String>) -> Self {
        ApiState {
            project: Arc::new(Mutex::new(project)),
            default_reviewer: default_reviewer.into(),
        }
    }

    pub fn project(&self) -> MutexGuard<'_, Project> {
        // a panic inside a handler leaves the project itself consistent,
        // since every mutation is a single commit
        self.project.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }
}

impl From<DecisionError> for ApiError {
    fn from(e: DecisionError) -> Self {
        let status = match &e {
            DecisionError::UnknownEntry(_) => StatusCode::NOT_FOUND,
            DecisionError::IllegalTransition { .. } => StatusCode::CONFLICT,
            DecisionError::InvalidDecision(_) | DecisionError::ValidationFailed(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            DecisionError::Store(crate::store::StoreError::UnknownSource(_)) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            DecisionError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "code": self.code, "message": self.message })),
        )
            .into_response()
    }
}

#[derive(Debug, Deserialize)]
pub struct QueueParams {
    pass: u8,
    limit: Option<usize>,
}

async fn queue(
    State(state): State<ApiState>,
    params: Result<Query<QueueParams>, QueryRejection>,
) -> Result<Json<Vec<super::QueueItem>>, ApiError> {
    let Query(params) = params.map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "InvalidQuery",
            e.body_text(),
        )
    })?;
    let pass = Pass::try_from(params.pass)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidQuery", e))?;
    let project = state.project();
    Ok(Json(review_queue(
        &project,
        pass,
        params.limit.unwrap_or(DEFAULT_LIMIT),
    )))
}

#[derive(Debug, Serialize)]
pub struct EntryDetail {
    pub entry: LexemeEntry,
    pub pending_fills: Vec<ProposedFill>,
}

async fn entry(
    State(state): State<ApiState>,
    Path(id): Path<String>,
) -> Result<Json<EntryDetail>, ApiError> {
    let project = state.project();
    let entry = project
        .entry(&id)
        .ok_or_else(|| ApiError::from(DecisionError::UnknownEntry(id.clone())))?
        .clone();
    let pending_fills = propagate_fields(project.edges(), project.entries())
        .into_iter()
        .filter(|f| f.child_id == id)
        .collect();
    Ok(Json(EntryDetail {
        entry,
        pending_fills,
    }))
}

/// Body of a decision submission.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionBody {
    pub pass: Pass,
    pub action: Action,
    #[serde(default)]
    pub corrections: Corrections,
    #[serde(default)]
    pub reviewer: Option<String>,
}

async fn decide(
    State(state): State<ApiState>,
    Path(id): Path<String>,
    body: Result<Json<DecisionBody>, JsonRejection>,
) -> Result<Json<LexemeEntry>, ApiError> {
    let Json(body) = body.map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "InvalidDecision",
            e.body_text(),
        )
    })?;
    let reviewer = body
        .reviewer
        .filter(|r| !r.trim().is_empty())
        .unwrap_or_else(|| state.default_reviewer.clone());
    let decision =
        Decision::new(id, body.pass, body.action, reviewer).with_corrections(body.corrections);
    let mut project = state.project();
    let updated = apply_decision(&mut project, decision)?;
    project
        .sync()
        .map_err(|e| ApiError::from(DecisionError::Store(e)))?;
    Ok(Json(updated))
}

async fn get_stats(State(state): State<ApiState>) -> Json<super::Stats> {
    Json(stats(&state.project()))
}

async fn no_ui() -> impl IntoResponse {
    (
        StatusCode::NOT_FOUND,
        "review UI assets are not configured; start with --ui-dir\n",
    )
}

/// API routes, plus static UI assets from `ui_dir` when given.
pub fn router(state: ApiState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/queue", get(queue))
        .route("/api/entries/{id}", get(entry))
        .route("/api/entries/{id}/decision", post(decide))
        .route("/api/stats", get(get_stats))
        .with_state(state);
    match ui_dir {
        Some(dir) => {
            api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true))
        }
        None => api.fallback(no_ui),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("address {0} is already in use")]
    AddressInUse(SocketAddr),
    #[error("{addr}: {source}")]
    Io {
        addr: SocketAddr,
        source: std::io::Error,
    },
}

/// A bound, not yet running review server.
pub struct ReviewServer {
    listener: tokio::net::TcpListener,
    router: Router,
}

impl ReviewServer {
    pub async fn bind(
        addr: SocketAddr,
        state: ApiState,
        ui_dir: Option<PathBuf>,
    ) -> Result<Self, ServeError> {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|source| match source.kind() {
                std::io::ErrorKind::AddrInUse => ServeError::AddressInUse(addr),
                _ => ServeError::Io { addr, source },
            })?;
        Ok(ReviewServer {
            listener,
            router: router(state, ui_dir),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serve until `shutdown` resolves.
    pub async fn run(
        self,
        shutdown: impl Future<Output = ()> + Send + 'static,
    ) -> std::io::Result<()> {
        axum::serve(self.listener, self.router)
            .with_graceful_shutdown(shutdown)
            .await
    }
}
