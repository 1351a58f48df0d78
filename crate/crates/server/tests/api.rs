use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use adaptutor_core::config::EngineConfig;
use adaptutor_core::session::{
    log_path, read_log, run_script, scripted_student, Engine, ResponseInput, Session, FREE_TEXT_EVERY,
    SCRIPT_FREE_TEXT,
};
use adaptutor_server::{router, AppState};

fn app(data_dir: Option<std::path::PathBuf>) -> Router {
    router(Arc::new(AppState::new(EngineConfig::default(), data_dir).unwrap()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

async fn create(app: &Router, body: Value) -> String {
    let (status, v) = call(app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

/// Drives `n` scripted answers through the API and returns the update summaries.
async fn answer_scripted(app: &Router, id: &str, seed: u64, n: usize) -> Vec<Value> {
    let engine = Engine::new(EngineConfig::default()).unwrap();
    let mut student = scripted_student(&engine.config, seed);
    let mut out = Vec::new();
    for k in 1..=n {
        let (status, step) = call(app, Method::GET, &format!("/sessions/{id}/next"), None).await;
        assert_eq!(status, StatusCode::OK, "{step}");
        let item = engine.bank.get(step["item"]["id"].as_str().unwrap()).unwrap().clone();
        let obs = student.simulate_response(&item).unwrap();
        let mut input = ResponseInput::new(&student.answer_text(&item, obs.correct), obs.latency_ms);
        input.item_id = Some(item.id.clone());
        if k % FREE_TEXT_EVERY == 0 {
            input.free_text = Some(SCRIPT_FREE_TEXT[(k / FREE_TEXT_EVERY - 1) % 2].to_string());
        }
        let body = serde_json::to_value(&input).unwrap();
        let (status, summary) = call(app, Method::POST, &format!("/sessions/{id}/responses"), Some(body)).await;
        assert_eq!(status, StatusCode::OK, "{summary}");
        out.push(summary);
    }
    out
}

fn local_session(id: &str, seed: u64, n: usize) -> Session {
    let engine = Arc::new(Engine::new(EngineConfig::default()).unwrap());
    let mut s = Session::create(Arc::clone(&engine), id, seed).unwrap();
    let mut student = scripted_student(&engine.config, seed);
    run_script(&mut s, &mut student, n).unwrap();
    s
}

#[tokio::test]
async fn health() {
    let (status, _) = call(&app(None), Method::GET, "/health", None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn scripted_run_matches_library_and_report() {
    let app = app(None);
    let id = create(&app, json!({ "seed": 77 })).await;
    let summaries = answer_scripted(&app, &id, 77, 10).await;
    let local = local_session(&id, 77, 10);

    let (status, report) = call(&app, Method::GET, &format!("/sessions/{id}/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report, serde_json::to_value(local.report()).unwrap());
    assert_eq!(report["responses"], 10);

    // the report's per-construct numbers are the last ones the updates returned
    let last = summaries.last().unwrap();
    for c in report["constructs"].as_array().unwrap() {
        let name = c["construct"].as_str().unwrap();
        assert_eq!(c["theta"], last["theta"][name], "{name}");
    }
    let items: u64 = report["constructs"].as_array().unwrap().iter().map(|c| c["items"].as_u64().unwrap()).sum();
    let scored = summaries.iter().filter(|s| !s["correct"].is_null()).count() as u64;
    assert_eq!(items, scored);

    let (_, page) = call(&app, Method::GET, &format!("/sessions/{id}/events"), None).await;
    assert_eq!(page["events"], serde_json::to_value(local.events()).unwrap());
}

#[tokio::test]
async fn error_statuses() {
    let app = app(None);
    let (status, v) = call(&app, Method::GET, "/sessions/nope/next", None).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));
    let (status, _) = call(&app, Method::GET, "/sessions/..%2Fetc/report", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let id = create(&app, json!({ "seed": 1 })).await;
    let uri = format!("/sessions/{id}/responses");
    let (status, v) = call(&app, Method::POST, &uri, Some(json!({ "answer": "x", "latency_ms": 10 }))).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::CONFLICT, Some("no_pending_item")));

    call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    let body = json!({ "item_id": "other", "answer": "x", "latency_ms": 10 });
    let (status, v) = call(&app, Method::POST, &uri, Some(body)).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("mismatch")));
    let (status, v) = call(&app, Method::POST, &uri, Some(json!({ "answer": "x" }))).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));

    let (status, v) = call(&app, Method::POST, "/sessions", Some(json!({ "config": { "assessment": { "budget": "many" } } }))).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_config")));
    let (status, _) = call(&app, Method::POST, "/sessions", Some(json!({ "sede": 3 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn likert_validation_is_422() {
    let app = app(None);
    let cfg = json!({ "assessment": { "budget": 1 }, "tutoring": { "likert_every": 1 } });
    let id = create(&app, json!({ "seed": 2, "config": cfg })).await;
    answer_scripted(&app, &id, 2, 1).await;
    let (_, step) = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    assert_eq!(step["item"]["kind"], "LIKERT");
    let uri = format!("/sessions/{id}/responses");
    let (status, v) = call(&app, Method::POST, &uri, Some(json!({ "answer": "9", "latency_ms": 10 }))).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_answer")));
    let (status, v) = call(&app, Method::POST, &uri, Some(json!({ "answer": "4", "latency_ms": 10 }))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["profile_updated"], "questionnaire");
}

#[tokio::test]
async fn events_are_paged_by_sequence() {
    let app = app(None);
    let id = create(&app, json!({ "seed": 3 })).await;
    answer_scripted(&app, &id, 3, 4).await;
    let (_, all) = call(&app, Method::GET, &format!("/sessions/{id}/events"), None).await;
    let total = all["total"].as_u64().unwrap();
    assert_eq!(all["events"].as_array().unwrap().len() as u64, total);
    let (_, page) = call(&app, Method::GET, &format!("/sessions/{id}/events?from=3&limit=2"), None).await;
    let seqs: Vec<u64> = page["events"].as_array().unwrap().iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, [3, 4]);
    assert_eq!(page["next"], 5);
    let (_, tail) = call(&app, Method::GET, &format!("/sessions/{id}/events?from={}", total + 5), None).await;
    assert!(tail["events"].as_array().unwrap().is_empty());
    assert_eq!(tail["next"], total);
}

#[tokio::test]
async fn finished_session_is_409_and_still_reported() {
    let app = app(None);
    let cfg = json!({ "assessment": { "budget": 2 }, "tutoring": { "max_steps": 2 } });
    let id = create(&app, json!({ "seed": 4, "config": cfg })).await;
    let summaries = answer_scripted(&app, &id, 4, 4).await;
    assert_eq!(summaries.last().unwrap()["phase"], "DONE");
    let (status, v) = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::CONFLICT, Some("finished")));
    let (status, report) = call(&app, Method::GET, &format!("/sessions/{id}/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["phase"], "DONE");
    assert_eq!(report["responses"], 4);
}

#[tokio::test]
async fn sessions_survive_restart_through_logs() {
    let dir = tempfile::tempdir().unwrap();
    let first = app(Some(dir.path().to_path_buf()));
    let id = create(&first, json!({ "seed": 5 })).await;
    answer_scripted(&first, &id, 5, 6).await;
    let (_, before) = call(&first, Method::GET, &format!("/sessions/{id}/report"), None).await;
    drop(first);

    let second = app(Some(dir.path().to_path_buf()));
    let (status, after) = call(&second, Method::GET, &format!("/sessions/{id}/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before, after);

    // continuing after the restart matches an uninterrupted run
    let (status, _) = call(&second, Method::GET, &format!("/sessions/{id}/next"), None).await;
    assert_eq!(status, StatusCode::OK);
    let local = local_session(&id, 5, 6);
    let mut cont = local_session(&id, 5, 6);
    cont.next_step().unwrap();
    let (_, page) = call(&second, Method::GET, &format!("/sessions/{id}/events"), None).await;
    assert_eq!(page["events"], serde_json::to_value(cont.events()).unwrap());
    assert_eq!(read_log(log_path(dir.path(), &id)).unwrap(), cont.events());
    assert!(local.events().len() < cont.events().len());

    // new ids never collide with logs already on disk
    let other = create(&second, json!({})).await;
    assert_ne!(other, id);
}

#[tokio::test]
async fn concurrent_sessions_are_independent() {
    let app = app(None);
    let a = create(&app, json!({ "seed": 8 })).await;
    let b = create(&app, json!({ "seed": 9 })).await;
    let (ra, rb) = tokio::join!(answer_scripted(&app, &a, 8, 8), answer_scripted(&app, &b, 9, 8));
    assert_eq!(ra.len(), 8);
    assert_eq!(rb.len(), 8);
    let (_, report_a) = call(&app, Method::GET, &format!("/sessions/{a}/report"), None).await;
    assert_eq!(report_a, serde_json::to_value(local_session(&a, 8, 8).report()).unwrap());
    let (_, report_b) = call(&app, Method::GET, &format!("/sessions/{b}/report"), None).await;
    assert_eq!(report_b, serde_json::to_value(local_session(&b, 9, 8).report()).unwrap());
}
