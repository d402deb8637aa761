#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rapport_core::content::{load_assets, ContentBank};
use rapport_core::engine::{Annotations, Engine, EngineConfig, PoqStep};
use rapport_core::log::{read_log_dir, LogRecord, Speaker};
use rapport_core::sim::{respond, sample_profile, ConversationProgress, SimConfig};
use rapport_core::user::MemoryUserStore;
use rapport_gateway::service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tempfile::TempDir;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn bank() -> Arc<ContentBank> {
    static BANK: OnceLock<Arc<ContentBank>> = OnceLock::new();
    BANK.get_or_init(|| Arc::new(load_assets(data_dir()).expect("shipped bank is valid")))
        .clone()
}

pub struct Harness {
    pub state: Arc<AppState>,
    pub app: Router,
    pub store: Arc<MemoryUserStore>,
    pub logs: TempDir,
}

pub fn harness(idle_timeout: Duration) -> Harness {
    let logs = tempfile::tempdir().unwrap();
    let store = Arc::new(MemoryUserStore::new());
    let config = ServiceConfig {
        idle_timeout,
        log_dir: Some(logs.path().to_path_buf()),
        ..ServiceConfig::default()
    };
    let engine = Arc::new(Engine::new(bank(), EngineConfig::default()));
    let state = Arc::new(AppState::new(engine, store.clone(), config));
    Harness {
        app: router(Arc::clone(&state)),
        state,
        store,
        logs,
    }
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json");
    let request = match body {
        Some(v) => request.body(Body::from(v.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = tower::ServiceExt::oneshot(app.clone(), request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| json!(String::from_utf8_lossy(&bytes)));
    (status, value)
}

pub async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

/// What a simulated client saw over the API.
#[derive(Debug)]
pub struct ClientRun {
    pub session_id: String,
    pub user_id: String,
    pub exchanges: u32,
    pub turns: Vec<u32>,
    pub rating: u8,
}

/// Plays one simulated user against the API until the engine ends the
/// conversation, then rates it.
pub async fn drive_client(app: &Router, index: usize) -> Result<ClientRun, String> {
    let config = SimConfig::default();
    let profile = sample_profile(&config, 900, index);
    let (status, created) = post(app, "/sessions?debug=true", json!({ "user_id": profile.user_id })).await;
    if status != StatusCode::CREATED {
        return Err(format!("create {}: {status} {created}", profile.user_id));
    }
    let session_id = created["session_id"].as_str().unwrap().to_string();
    let mut last: Annotations = serde_json::from_value(created["annotations"].clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(index as u64);
    let mut progress = ConversationProgress::default();
    let mut turns = Vec::new();
    let uri = format!("/sessions/{session_id}/turns?debug=true");
    loop {
        let text = respond(&profile, &last, progress, &bank(), &config.behavior, &mut rng);
        let (status, reply) = post(app, &uri, json!({ "text": text })).await;
        if status != StatusCode::OK {
            return Err(format!("turn on {session_id}: {status} {reply}"));
        }
        turns.push(reply["turn"].as_u64().unwrap() as u32);
        progress.exchanges += 1;
        last = serde_json::from_value(reply["annotations"].clone()).unwrap();
        if matches!(&last.poq_sequence, Some(p) if p.step == PoqStep::Ground && !p.abandoned) {
            progress.completed_poq += 1;
        }
        if reply["done"].as_bool().unwrap() {
            break;
        }
        if progress.exchanges > 200 {
            return Err(format!("{session_id} never ended"));
        }
        tokio::task::yield_now().await;
    }
    let rating = 1 + (index % 5) as u8;
    let (status, body) = post(app, &format!("/sessions/{session_id}/rating"), json!({ "rating": rating })).await;
    if status != StatusCode::OK {
        return Err(format!("rating on {session_id}: {status} {body}"));
    }
    Ok(ClientRun {
        session_id,
        user_id: profile.user_id,
        exchanges: progress.exchanges,
        turns,
        rating,
    })
}

/// Runs `n` simulated clients concurrently and checks every log they left.
pub async fn concurrent_sessions(n: usize) -> Result<(), String> {
    let h = harness(Duration::from_secs(300));
    let tasks: Vec<_> = (0..n)
        .map(|i| {
            let app = h.app.clone();
            tokio::spawn(async move { drive_client(&app, i).await })
        })
        .collect();
    let mut runs = Vec::new();
    for task in tasks {
        runs.push(task.await.map_err(|e| e.to_string())??);
    }
    check_logs(h.logs.path(), &runs)
}

/// Every conversation log must be gapless, single-conversation, rated once
/// with the rating the client sent, and agree with the client's view.
pub fn check_logs(dir: &Path, runs: &[ClientRun]) -> Result<(), String> {
    let records = read_log_dir(dir).map_err(|e| e.to_string())?;
    let mut by_conversation: BTreeMap<&str, Vec<&LogRecord>> = BTreeMap::new();
    for r in &records {
        by_conversation.entry(&r.conversation_id).or_default().push(r);
    }
    if by_conversation.len() != runs.len() {
        return Err(format!("{} logs for {} sessions", by_conversation.len(), runs.len()));
    }
    for run in runs {
        let log = by_conversation
            .get(run.session_id.as_str())
            .ok_or_else(|| format!("no log for {}", run.session_id))?;
        for (i, r) in log.iter().enumerate() {
            if r.turn != i as u32 {
                return Err(format!("{}: turn {} at position {i}", run.session_id, r.turn));
            }
            if r.user_id != run.user_id {
                return Err(format!("{}: record from {}", run.session_id, r.user_id));
            }
        }
        let ratings: Vec<u8> = log.iter().filter_map(|r| r.rating()).collect();
        if ratings != [run.rating] {
            return Err(format!("{}: ratings {ratings:?}, sent {}", run.session_id, run.rating));
        }
        // agent greeting, then (user, agent) per exchange, then the rating.
        let expected = 1 + 2 * run.exchanges as usize + 1;
        if log.len() != expected {
            return Err(format!("{}: {} records, expected {expected}", run.session_id, log.len()));
        }
        for (k, turn) in run.turns.iter().enumerate() {
            let agent = log[*turn as usize];
            let user = log[*turn as usize - 1];
            if *turn != 2 * (k as u32 + 1) || agent.speaker != Speaker::Agent || user.speaker != Speaker::User {
                return Err(format!("{}: exchange {k} out of order", run.session_id));
            }
        }
    }
    Ok(())
}
