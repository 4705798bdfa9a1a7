use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use epike_core::actions::ActionKind;
use epike_harness::service::{router, AppState, Events, HumanView, Status};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn create(app: &Router, scenario: &str) -> u64 {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({ "scenario": scenario, "human": "H" }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session"].as_u64().unwrap()
}

async fn view(app: &Router, id: u64) -> HumanView {
    let (status, body) = call(app, "GET", &format!("/sessions/{id}/view"), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    serde_json::from_value(body).unwrap()
}

fn execute(tp: &str) -> Value {
    json!({ "kind": "execute", "actor": "H", "payload": tp })
}

#[tokio::test]
async fn taking_juice_brings_the_glass() {
    let app = router(AppState::default());
    let id = create(&app, "breakfast-case1").await;
    let v = view(&app, id).await;
    assert_eq!(v.status, Status::Running);
    assert_eq!(v.human, "H");
    assert!(v.pending_question.is_none());
    // H holds the unconstrained world possible, so all four subplans show.
    assert_eq!(v.subplans.len(), 4);
    let payloads: Vec<_> = v
        .candidates
        .iter()
        .filter(|c| c.kind == ActionKind::Execute)
        .map(|c| c.payload.clone().unwrap())
        .collect();
    assert_eq!(payloads, ["e_coffee", "e_juice"]);

    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/actions"), Some(execute("e_juice"))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let events: Events = serde_json::from_value(body).unwrap();
    assert_eq!(events.events[0].payload.as_deref(), Some("e_juice"));
    let engine = events.events.iter().find(|r| r.actor == "R").expect("the robot responds");
    assert_eq!(engine.kind, ActionKind::Execute);
    assert_eq!(engine.payload.as_deref(), Some("e_glass"));
    assert_eq!(events.status, Status::Success);

    let v = view(&app, id).await;
    assert!(v.candidates.is_empty());
    assert_eq!(v.last_engine_action.unwrap().payload.as_deref(), Some("e_glass"));
}

#[tokio::test]
async fn unavailable_actions_are_rejected() {
    let app = router(AppState::default());
    let id = create(&app, "breakfast-case1").await;
    let uri = format!("/sessions/{id}/actions");
    let (status, _) = call(&app, "POST", &uri, Some(json!({ "kind": "execute", "actor": "R", "payload": "e_mug" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", &uri, Some(execute("e_mug"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", &uri, Some(execute("e_tea"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", &uri, Some(execute("e_juice"))).await;
    assert_eq!(status, StatusCode::OK);
    // The same execution twice is stale.
    let (status, body) = call(&app, "POST", &uri, Some(execute("e_juice"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("not available"));
}

#[tokio::test]
async fn answering_the_question_unblocks_the_robot() {
    let app = router(AppState::default());
    let id = create(&app, "breakfast-case2-ordered").await;
    let v = view(&app, id).await;
    let q = v.pending_question.clone().expect("the robot asks first");
    assert_eq!(q.asker, "R");
    let answers: Vec<_> = v.candidates.iter().filter(|c| c.kind == ActionKind::Answer).collect();
    assert!(!answers.is_empty());
    let answer = serde_json::to_value(answers[0]).unwrap();
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/actions"), Some(answer)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let events: Events = serde_json::from_value(body).unwrap();
    assert!(events.events.iter().any(|r| r.actor == "R"), "{events:?}");
    assert!(view(&app, id).await.pending_question.is_none());
}

#[tokio::test]
async fn events_and_closing() {
    let app = router(AppState::default());
    let id = create(&app, "breakfast-case3").await;
    let (status, body) = call(&app, "GET", &format!("/sessions/{id}/events?since=0"), None).await;
    assert_eq!(status, StatusCode::OK);
    let events: Events = serde_json::from_value(body).unwrap();
    assert_eq!(events.status, Status::Failure);
    assert_eq!(events.events[0].payload.as_deref(), Some("e_juice"));
    assert!(events.events.iter().any(|r| r.actor == "R" && r.kind == ActionKind::Explain));
    let (_, body) = call(&app, "GET", &format!("/sessions/{id}/events?since=1"), None).await;
    assert!(body["events"].as_array().unwrap().iter().all(|r| r["seq"].as_u64().unwrap() >= 1));

    let (status, _) = call(&app, "DELETE", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/view"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "DELETE", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn bad_requests() {
    let app = router(AppState::default());
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "scenario": "nope", "human": "H" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "scenario": "breakfast-case1", "human": "Z" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = call(&app, "GET", "/scenarios", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body.as_array().unwrap().len(), 5);
}

#[tokio::test]
async fn inline_scenarios_are_accepted() {
    let app = router(AppState::default());
    let file: Value = serde_json::from_str(include_str!("../scenarios/breakfast-case1.json")).unwrap();
    let (status, body) = call(&app, "POST", "/sessions", Some(json!({ "scenario": file, "human": "H", "engine": "pike" }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
}
