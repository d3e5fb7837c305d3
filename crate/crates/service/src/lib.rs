//! HTTP API for live part-wise elicitation sessions.
//!
//! | method | path                             | purpose                                   |
//! |--------|----------------------------------|-------------------------------------------|
//! | GET    | `/health`                        | liveness and session count                |
//! | GET    | `/problems`                      | problem catalog                           |
//! | POST   | `/sessions`                      | open a session, returns its state         |
//! | GET    | `/sessions/{id}/recommendation`  | the pending part with its context         |
//! | POST   | `/sessions/{id}/improvement`     | answer the pending turn                   |
//! | GET    | `/sessions/{id}/state`           | weights, configuration, trace and phase   |
//! | DELETE | `/sessions/{id}`                 | close a session and drop its journal      |
//!
//! Errors are returned as `{code, message, details}`.

pub mod context;
pub mod error;
pub mod journal;
pub mod registry;
pub mod session;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use uuid::Uuid;

pub use context::{ContextSummary, GlobalFeatures, NamedScalar, NeighborContext};
pub use error::ApiError;
pub use journal::{Event, Journal};
pub use registry::{Problem, ProblemInfo, Registry};
pub use session::{Improvement, Phase, RecommendationView, Session, SessionOptions, TurnResult};

#[derive(Debug)]
struct Inner {
    registry: Registry,
    sessions: RwLock<HashMap<Uuid, Arc<Session>>>,
    journal: Option<Journal>,
}

/// Shared service state; cheap to clone.
#[derive(Clone, Debug)]
pub struct AppState(Arc<Inner>);

#[derive(Debug, Default)]
pub struct RestoreReport {
    pub restored: Vec<Uuid>,
    pub failed: Vec<(PathBuf, String)>,
}

impl AppState {
    pub fn new(registry: Registry, journal: Option<Journal>) -> Self {
        AppState(Arc::new(Inner {
            registry,
            sessions: RwLock::new(HashMap::new()),
            journal,
        }))
    }

    pub fn registry(&self) -> &Registry {
        &self.0.registry
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        let not_found = || ApiError::SessionNotFound(id.to_string());
        let uuid = Uuid::parse_str(id).map_err(|_| not_found())?;
        let sessions = self.0.sessions.read().unwrap_or_else(|e| e.into_inner());
        sessions.get(&uuid).cloned().ok_or_else(not_found)
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    fn insert(&self, session: Session) -> Arc<Session> {
        let session = Arc::new(session);
        self.0
            .sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(session.id, Arc::clone(&session));
        session
    }

    /// Replays every journal file; sessions that fail to replay are reported and skipped.
    pub fn restore(&self) -> std::io::Result<RestoreReport> {
        let mut report = RestoreReport::default();
        let Some(journal) = &self.0.journal else {
            return Ok(report);
        };
        for path in journal.files()? {
            let restored = journal::read_events(&path)
                .map_err(|e| e.to_string())
                .and_then(|events| {
                    let problem = match events.first() {
                        Some(Event::Created { problem, .. }) => problem.clone(),
                        _ => return Err("journal does not start with a creation event".to_string()),
                    };
                    let problem = self
                        .0
                        .registry
                        .get(&problem)
                        .ok_or_else(|| format!("unknown problem `{problem}`"))?;
                    Session::replay(problem, &events).map_err(|e| e.to_string())
                });
            match restored {
                Ok(session) => report.restored.push(self.insert(session).id),
                Err(e) => report.failed.push((path, e)),
            }
        }
        Ok(report)
    }

    pub async fn create(&self, request: CreateSession) -> Result<Arc<Session>, ApiError> {
        let problem = self
            .0
            .registry
            .get(&request.problem)
            .ok_or_else(|| ApiError::UnknownProblem(request.problem.clone()))?;
        let id = Uuid::new_v4();
        let options = request.options;
        let session = tokio::task::spawn_blocking(move || Session::start(id, problem, options))
            .await
            .map_err(|e| ApiError::Internal(format!("session start failed: {e}")))??;
        if let Some(journal) = &self.0.journal {
            journal.append(
                id,
                &Event::Created {
                    session: id,
                    problem: request.problem,
                    options: session.options.clone(),
                },
            )?;
        }
        Ok(self.insert(session))
    }

    pub async fn delete(&self, id: &str) -> Result<(), ApiError> {
        let session = self.session(id)?;
        session.close().await;
        self.0
            .sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .remove(&session.id);
        if let Some(journal) = &self.0.journal {
            journal.remove(session.id)?;
        }
        Ok(())
    }

    pub async fn submit(&self, id: &str, improvement: Improvement) -> Result<TurnResult, ApiError> {
        let session = self.session(id)?;
        session.submit(self.0.journal.as_ref(), improvement).await
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub problem: String,
    #[serde(default)]
    pub options: SessionOptions,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::BadRequest(e.body_text()))
}

async fn health(State(state): State<AppState>) -> impl IntoResponse {
    Json(json!({ "status": "ok", "sessions": state.session_count() }))
}

async fn problems(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.registry().catalog())
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let session = state.create(body(payload)?).await?;
    Ok((StatusCode::CREATED, Json(session.snapshot())))
}

async fn recommendation(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.session(&id)?.recommendation()))
}

async fn improvement(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<Improvement>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.submit(&id, body(payload)?).await?))
}

async fn session_state(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.session(&id)?.snapshot()))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    state.delete(&id).await?;
    Ok(StatusCode::NO_CONTENT)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/problems", get(problems))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/recommendation", get(recommendation))
        .route("/sessions/{id}/improvement", post(improvement))
        .route("/sessions/{id}/state", get(session_state))
        .with_state(state)
}
