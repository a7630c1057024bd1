mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use belief_dialog_service::http::router;
use belief_dialog_service::AdvisorService;
use common::{bundled_engine, fixed_engine, GREETING, ADVISING_TURNS};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

async fn say(app: &Router, id: &str, text: &str) -> (StatusCode, Value) {
    call(app, "POST", &format!("/api/sessions/{id}/messages"), Some(&json!({ "text": text }).to_string())).await
}

fn names(v: &Value) -> Vec<&str> {
    v.as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect()
}

#[tokio::test]
async fn advising_script_over_the_wire() {
    let app = router(Arc::new(AdvisorService::in_memory(bundled_engine())));
    let (status, created) = call(&app, "POST", "/api/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["id"].as_str().unwrap().to_string();
    assert_eq!(created["transcript"][0]["text"], GREETING);
    assert_eq!(created["transcript"][0]["speaker"], "advisor");

    let (status, t1) = say(&app, &id, ADVISING_TURNS[0]).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(t1["belief"]["label"], "curious");
    let skipped = names(&t1["skipped_states"]);
    assert!(skipped.contains(&"ask_interest") && skipped.contains(&"ask_semester"));
    assert_eq!(t1["asked_state"], "ask_workload");
    assert_eq!(t1["reply"], "Do you have any specific requirement about the workload of the course?");
    for key in ["reply", "belief", "fired_rules", "skipped_states", "asked_state", "slots", "status"] {
        assert!(t1.get(key).is_some(), "missing {key}");
    }
    let probs: f64 = t1["belief"]["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).sum();
    assert!((probs - 1.0).abs() < 1e-9);

    let (_, t2) = say(&app, &id, ADVISING_TURNS[1]).await;
    assert_eq!(t2["reply"], "Do you have any timing preferences?");
    let (_, t3) = say(&app, &id, ADVISING_TURNS[2]).await;
    assert_eq!(t3["slots"]["timing"], "morning");
    assert_eq!(t3["status"], "completed");
    assert!(names(&t3["skipped_states"]).contains(&"ask_extra_details"));
    assert_eq!(t3["reply"], "I would advise you STATS250 \"Statistics and Data Analysis\" which is an easy course.");
    assert_eq!(t3["recommendation"]["code"], "stats250");

    let (status, snap) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snap["transcript"].as_array().unwrap().len(), 1 + 2 * 3);
    assert_eq!(snap["slots"], t3["slots"]);
    assert_eq!(snap["status"], "completed");
    for w in snap["weights"].as_object().unwrap().values() {
        assert!((0.0..=1.0).contains(&w.as_f64().unwrap()));
    }
    assert_eq!(snap["transcript"][6]["payload"]["slots"], t3["slots"]);

    let (status, err) = say(&app, &id, "one more thing").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["kind"], "conflict");
}

#[tokio::test]
async fn sessions_get_distinct_ids() {
    let app = router(Arc::new(AdvisorService::in_memory(fixed_engine("neutral"))));
    let (_, a) = call(&app, "POST", "/api/sessions", None).await;
    let (_, b) = call(&app, "POST", "/api/sessions", None).await;
    assert_ne!(a["id"], b["id"]);
    let (status, h) = call(&app, "GET", "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(h["status"], "ok");
    assert_eq!(h["sessions"], 2);
    assert_eq!(h["labels"], json!(["curious", "confused", "neutral"]));
}

#[tokio::test]
async fn errors_are_structured_and_change_nothing() {
    let app = router(Arc::new(AdvisorService::in_memory(fixed_engine("neutral"))));
    let (status, err) = call(&app, "GET", "/api/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["kind"], "not_found");
    let (status, _) = say(&app, "nope", "hello").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, err) = call(&app, "GET", "/api/elsewhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["kind"], "not_found");

    let (_, created) = call(&app, "POST", "/api/sessions", None).await;
    let id = created["id"].as_str().unwrap();
    let uri = format!("/api/sessions/{id}/messages");
    let (_, before) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    for body in [r#"{"text": "   "}"#, "not json", r#"{"words": "hi"}"#, r#"{"text": 5}"#] {
        let (status, err) = call(&app, "POST", &uri, Some(body)).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert_eq!(err["error"]["kind"], "validation");
        assert!(!err["error"]["message"].as_str().unwrap().is_empty());
    }
    let (status, _) = say(&app, id, &"x".repeat(5000)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (_, after) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn turn_count_matches_transcript() {
    let app = router(Arc::new(AdvisorService::in_memory(fixed_engine("neutral"))));
    let (_, created) = call(&app, "POST", "/api/sessions", None).await;
    let id = created["id"].as_str().unwrap();
    let mut last = Value::Null;
    for (n, text) in ["hello", "I like statistics", "I am a junior"].iter().enumerate() {
        let (status, r) = say(&app, id, text).await;
        assert_eq!(status, StatusCode::OK);
        let (_, snap) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
        assert_eq!(snap["transcript"].as_array().unwrap().len(), 1 + 2 * (n + 1));
        assert_eq!(snap["slots"], r["slots"]);
        last = r;
    }
    assert_eq!(last["status"], "active");
}
