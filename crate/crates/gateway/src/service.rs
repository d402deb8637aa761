//! Session lifecycle and the JSON API.
//!
//! Each session wraps one [`Conversation`]. Turns for a session are
//! serialized by a per-session async mutex, while distinct sessions run
//! independently. When the engine closes a conversation the session
//! releases the user's lease and keeps only its transcript, which stays
//! ratable until the idle reaper drops it.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use rapport_core::engine::{
    Annotations, Conversation, ConversationSpec, Detections, Engine, EngineError, RatingError,
};
use rapport_core::experiment::{assign_arm, Arm, ExperimentConfig};
use rapport_core::log::{Clock, Transcript};
use rapport_core::user::{StoreError, UserStore};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::cors::CorsLayer;
use tower_http::trace::TraceLayer;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(5 * 60);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub idle_timeout: Duration,
    /// Where finished transcripts are written; `None` keeps them in memory.
    pub log_dir: Option<PathBuf>,
    pub experiment: ExperimentConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            log_dir: None,
            experiment: ExperimentConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} is closed")]
    SessionClosed(String),
    #[error("session {0} has not ended yet")]
    SessionActive(String),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ApiError::SessionClosed(_) | ApiError::SessionActive(_) => StatusCode::CONFLICT,
            ApiError::Rating(RatingError::AlreadyRated) => StatusCode::CONFLICT,
            ApiError::Rating(RatingError::OutOfRange(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Store(StoreError::SessionConflict(_)) => StatusCode::CONFLICT,
            ApiError::Store(StoreError::StorageUnavailable(_)) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Store(StoreError::InvalidUserId(_)) => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::UnknownSession(_) => "unknown_session",
            ApiError::SessionClosed(_) => "session_closed",
            ApiError::SessionActive(_) => "session_active",
            ApiError::Rating(RatingError::AlreadyRated) => "already_rated",
            ApiError::Rating(RatingError::OutOfRange(_)) => "out_of_range",
            ApiError::Store(StoreError::SessionConflict(_)) => "session_conflict",
            ApiError::Store(StoreError::StorageUnavailable(_)) => "storage_unavailable",
            ApiError::Store(StoreError::InvalidUserId(_)) => "invalid_user_id",
        }
    }

    fn from_engine(err: EngineError, session_id: &str) -> Self {
        match err {
            EngineError::InvalidState => ApiError::SessionClosed(session_id.to_string()),
            EngineError::Store(e) => ApiError::Store(e),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code().to_string(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}

enum Slot {
    Live(Box<Conversation>),
    Ended(Transcript),
}

struct Session {
    id: String,
    user_id: String,
    created_at: DateTime<Utc>,
    last_activity: Instant,
    slot: Slot,
}

impl Session {
    fn transcript(&self) -> &Transcript {
        match &self.slot {
            Slot::Live(conv) => conv.transcript(),
            Slot::Ended(t) => t,
        }
    }

    /// Drops the conversation, and with it the user's lease.
    fn end(&mut self) {
        if let Slot::Live(_) = self.slot {
            let placeholder = Slot::Ended(Transcript::new("", "", Clock::Wall));
            if let Slot::Live(conv) = std::mem::replace(&mut self.slot, placeholder) {
                self.slot = Slot::Ended(conv.into_transcript());
            }
        }
    }
}

type SessionHandle = Arc<tokio::sync::Mutex<Session>>;

pub struct AppState {
    engine: Arc<Engine>,
    store: Arc<dyn UserStore>,
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, SessionHandle>>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, store: Arc<dyn UserStore>, config: ServiceConfig) -> Self {
        Self {
            engine,
            store,
            config,
            sessions: Mutex::default(),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn session_count(&self) -> usize {
        self.table().len()
    }

    fn table(&self) -> std::sync::MutexGuard<'_, HashMap<String, SessionHandle>> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        self.table()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))
    }

    fn persist(&self, session: &Session) {
        let Some(dir) = &self.config.log_dir else {
            return;
        };
        if let Err(err) = session.transcript().write_to(dir) {
            tracing::warn!(session = %session.id, "cannot write conversation log: {err}");
        }
    }

    pub fn create_session(&self, user_id: &str) -> Result<SessionCreated, ApiError> {
        let uuid = uuid::Uuid::new_v4();
        let session_id = uuid.simple().to_string();
        let arm = assign_arm(user_id, &self.config.experiment);
        let (hi, lo) = uuid.as_u64_pair();
        let spec = ConversationSpec {
            conversation_id: session_id.clone(),
            user_id: user_id.to_string(),
            policy: self.config.experiment.policy(arm),
            arm: Some(arm),
            seed: hi ^ lo,
            clock: Clock::Wall,
        };
        let (conversation, response) =
            Conversation::start(Arc::clone(&self.engine), Arc::clone(&self.store), spec)
                .map_err(|e| ApiError::from_engine(e, &session_id))?;
        let session = Session {
            id: session_id.clone(),
            user_id: user_id.to_string(),
            created_at: Utc::now(),
            last_activity: Instant::now(),
            slot: Slot::Live(Box::new(conversation)),
        };
        self.table()
            .insert(session_id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
        tracing::info!(session = %session_id, user_id, %arm, "session opened");
        Ok(SessionCreated {
            session_id,
            reply: response.text,
            done: response.annotations.done,
            arm,
            annotations: Some(response.annotations),
        })
    }

    pub async fn post_turn(&self, session_id: &str, text: &str) -> Result<TurnReply, ApiError> {
        let handle = self.session(session_id)?;
        let mut session = handle.lock().await;
        session.last_activity = Instant::now();
        let Slot::Live(conversation) = &mut session.slot else {
            return Err(ApiError::SessionClosed(session_id.to_string()));
        };
        let outcome = conversation
            .advance(text)
            .map_err(|e| ApiError::from_engine(e, session_id))?;
        let turn = conversation.transcript().records().len() as u32 - 1;
        let done = conversation.is_closed();
        if done {
            session.end();
            self.persist(&session);
            tracing::info!(session = %session_id, "conversation ended");
        }
        Ok(TurnReply {
            reply: outcome.response.text,
            done,
            turn,
            annotations: Some(outcome.response.annotations),
            detections: Some(outcome.detections),
        })
    }

    /// Records the rating of an ended conversation.
    pub async fn post_rating(&self, session_id: &str, rating: i64) -> Result<(), ApiError> {
        let handle = self.session(session_id)?;
        let mut session = handle.lock().await;
        session.last_activity = Instant::now();
        let Slot::Ended(transcript) = &mut session.slot else {
            return Err(ApiError::SessionActive(session_id.to_string()));
        };
        transcript.record_rating(rating)?;
        self.persist(&session);
        Ok(())
    }

    pub async fn session_info(&self, session_id: &str) -> Result<SessionInfo, ApiError> {
        let handle = self.session(session_id)?;
        let session = handle.lock().await;
        let transcript = session.transcript();
        Ok(SessionInfo {
            session_id: session.id.clone(),
            user_id: session.user_id.clone(),
            created_at: session.created_at,
            done: matches!(session.slot, Slot::Ended(_)),
            rating: transcript.rating(),
            turns: transcript.records().len(),
        })
    }

    /// Closes and forgets sessions idle for longer than the timeout.
    /// Sessions busy with a request are skipped. Returns how many were
    /// dropped.
    pub fn reap_idle(&self, now: Instant) -> usize {
        let handles: Vec<(String, SessionHandle)> = self
            .table()
            .iter()
            .map(|(id, h)| (id.clone(), Arc::clone(h)))
            .collect();
        let mut reaped = Vec::new();
        for (id, handle) in handles {
            let Ok(mut session) = handle.try_lock() else {
                continue;
            };
            if now.saturating_duration_since(session.last_activity) < self.config.idle_timeout {
                continue;
            }
            if let Slot::Live(conversation) = &mut session.slot {
                conversation.expire();
                session.end();
                self.persist(&session);
                tracing::info!(session = %id, "session expired");
            }
            reaped.push(id);
        }
        let mut table = self.table();
        for id in &reaped {
            table.remove(id);
        }
        reaped.len()
    }

    /// Expires every live session; used on shutdown.
    pub fn close_all(&self) -> usize {
        let far = Instant::now() + self.config.idle_timeout + Duration::from_secs(1);
        self.reap_idle(far)
    }
}

/// Runs [`AppState::reap_idle`] every `period` until the task is aborted.
pub fn spawn_reaper(state: Arc<AppState>, period: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(period);
        loop {
            ticker.tick().await;
            let n = state.reap_idle(Instant::now());
            if n > 0 {
                tracing::debug!(reaped = n, "idle sessions reaped");
            }
        }
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSession {
    pub user_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub reply: String,
    pub done: bool,
    pub arm: Arm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<Annotations>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PostTurn {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TurnReply {
    pub reply: String,
    pub done: bool,
    /// Log index of the agent record for this reply.
    pub turn: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<Annotations>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Detections>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PostRating {
    pub rating: i64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RatingRecorded {
    pub rating: i64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub user_id: String,
    pub created_at: DateTime<Utc>,
    pub done: bool,
    pub rating: Option<u8>,
    pub turns: usize,
}

#[derive(Debug, Default, Deserialize)]
pub struct DebugFlag {
    #[serde(default)]
    pub debug: bool,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/sessions/{id}/rating", post(post_rating))
        .route("/users/{id}/model", get(user_model))
        .layer(TraceLayer::new_for_http())
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "sessions": state.session_count() }))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Query(flag): Query<DebugFlag>,
    Json(body): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let mut created = state.create_session(&body.user_id)?;
    if !flag.debug {
        created.annotations = None;
    }
    Ok((StatusCode::CREATED, Json(created)))
}

async fn post_turn(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(flag): Query<DebugFlag>,
    Json(body): Json<PostTurn>,
) -> Result<Json<TurnReply>, ApiError> {
    let mut reply = state.post_turn(&id, &body.text).await?;
    if !flag.debug {
        reply.annotations = None;
        reply.detections = None;
    }
    Ok(Json(reply))
}

async fn post_rating(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<PostRating>,
) -> Result<Json<RatingRecorded>, ApiError> {
    state.post_rating(&id, body.rating).await?;
    Ok(Json(RatingRecorded { rating: body.rating }))
}

async fn session_info(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionInfo>, ApiError> {
    Ok(Json(state.session_info(&id).await?))
}

async fn user_model(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let model = state.store.load(&id)?;
    Ok(Json(model).into_response())
}
