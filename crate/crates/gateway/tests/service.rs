mod common;

use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use common::{call, harness, post};
use rapport_core::log::{read_log_dir, SystemEvent};
use serde_json::json;

const INTRO: [&str; 11] = [
    "my name is jordan",
    "swim",
    "i don't work but i've been able to do school",
    "not really",
    "hawaii",
    "i've already been there and i really liked it",
    "just bring out with to feel like i don't have any responsibility there because it's not my own house",
    "yeah",
    "i play chess",
    "if you had a different voice all the time",
    "how old are you",
];

async fn open(app: &axum::Router, user: &str) -> String {
    let (status, body) = post(app, "/sessions", json!({ "user_id": user })).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn hundred_concurrent_sessions_keep_their_logs_apart() {
    common::concurrent_sessions(100).await.unwrap();
}

#[tokio::test]
async fn topic_request_mid_conversation_and_debug_gating() {
    let h = harness(Duration::from_secs(300));
    let (status, created) = post(&h.app, "/sessions", json!({ "user_id": "u1" })).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(created.get("annotations").is_none());
    assert!(!created["reply"].as_str().unwrap().is_empty());
    let id = created["session_id"].as_str().unwrap();

    for text in INTRO {
        let (status, reply) = post(&h.app, &format!("/sessions/{id}/turns"), json!({ "text": text })).await;
        assert_eq!(status, StatusCode::OK);
        assert!(reply.get("annotations").is_none());
        assert_eq!(reply["done"], false);
    }
    let uri = format!("/sessions/{id}/turns?debug=true");
    let (_, reply) = post(&h.app, &uri, json!({ "text": "let's talk about movies" })).await;
    assert_eq!(reply["annotations"]["topic"], "movies");
    assert_eq!(reply["detections"]["topic_request"]["topic"], "movies");

    let (status, model) = call(&h.app, Method::GET, "/users/u1/model", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(model["name"], "jordan");
    assert_eq!(model["occupation"], "student");
}

#[tokio::test]
async fn error_contract() {
    let h = harness(Duration::from_secs(300));
    let id = open(&h.app, "dup").await;

    let (status, body) = post(&h.app, "/sessions", json!({ "user_id": "dup" })).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("session_conflict")));

    let (status, body) = post(&h.app, "/sessions", json!({ "user_id": "" })).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_user_id")));

    h.store.set_available(false);
    let before = h.state.session_count();
    let (status, body) = post(&h.app, "/sessions", json!({ "user_id": "other" })).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::SERVICE_UNAVAILABLE, Some("storage_unavailable")));
    assert_eq!(h.state.session_count(), before);
    h.store.set_available(true);

    let (status, body) = post(&h.app, "/sessions/nope/turns", json!({ "text": "hi" })).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_session")));

    let rating_uri = format!("/sessions/{id}/rating");
    let (status, body) = post(&h.app, &rating_uri, json!({ "rating": 5 })).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("session_active")));

    let (_, reply) = post(&h.app, &format!("/sessions/{id}/turns"), json!({ "text": "stop" })).await;
    assert_eq!(reply["done"], true);
    let (status, body) = post(&h.app, &format!("/sessions/{id}/turns"), json!({ "text": "hello?" })).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("session_closed")));

    // The ended session no longer holds the user.
    open(&h.app, "dup").await;

    let (status, body) = post(&h.app, &rating_uri, json!({ "rating": 6 })).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("out_of_range")));
    let (status, _) = post(&h.app, &rating_uri, json!({ "rating": 0 })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = post(&h.app, &rating_uri, json!({ "rating": "five" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = post(&h.app, &rating_uri, json!({ "rating": 5 })).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = post(&h.app, &rating_uri, json!({ "rating": 4 })).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("already_rated")));

    let records = read_log_dir(h.logs.path()).unwrap();
    let ratings: Vec<u8> = records.iter().filter(|r| r.conversation_id == id).filter_map(|r| r.rating()).collect();
    assert_eq!(ratings, [5]);

    let (status, health) = call(&h.app, Method::GET, "/healthz", None).await;
    assert_eq!((status, &health["status"]), (StatusCode::OK, &json!("ok")));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_turns_on_one_session_are_queued() {
    let h = harness(Duration::from_secs(300));
    let id = open(&h.app, "pair").await;
    let uri = format!("/sessions/{id}/turns");
    let (a, b) = tokio::join!(
        post(&h.app, &uri, json!({ "text": "my name is sam" })),
        post(&h.app, &uri, json!({ "text": "swimming" })),
    );
    assert_eq!((a.0, b.0), (StatusCode::OK, StatusCode::OK));
    let mut turns = [a.1["turn"].as_u64().unwrap(), b.1["turn"].as_u64().unwrap()];
    turns.sort();
    assert_eq!(turns, [2, 4]);
}

#[tokio::test]
async fn idle_sessions_expire_unrated() {
    let h = harness(Duration::from_millis(50));
    let id = open(&h.app, "idle").await;
    post(&h.app, &format!("/sessions/{id}/turns"), json!({ "text": "my name is ava" })).await;

    assert_eq!(h.state.reap_idle(Instant::now()), 0);
    assert_eq!(h.state.reap_idle(Instant::now() + Duration::from_secs(1)), 1);
    assert_eq!(h.state.session_count(), 0);

    let records = read_log_dir(h.logs.path()).unwrap();
    let last = records.last().unwrap();
    assert_eq!(last.system_event(), Some(SystemEvent::Expired));
    assert!(records.iter().all(|r| r.rating().is_none()));
    let (status, _) = post(&h.app, &format!("/sessions/{id}/rating"), json!({ "rating": 3 })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    open(&h.app, "idle").await;
}
