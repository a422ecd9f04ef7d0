mod common;

use std::sync::atomic::Ordering;
use std::sync::Arc;

use axum::http::StatusCode;
use chrono::Duration;
use common::{call, clock, scenarios_dir, GateProvider, TINY_SCENARIO};
use leia_core::client_sim::{ChatProvider, ScriptedProvider};
use leia_core::clock::ManualClock;
use leia_service::{router, Leia, ServiceConfig};
use serde_json::{json, Value};

fn open(data: &std::path::Path, provider: Arc<dyn ChatProvider>, clock: Arc<ManualClock>) -> Arc<Leia> {
    Arc::new(Leia::open(ServiceConfig::new(scenarios_dir(), data), provider, clock).unwrap())
}

async fn new_session(app: &axum::Router, scenario: &str, group: &str) -> Value {
    let (status, body) = call(
        app,
        "POST",
        "/sessions",
        Some(json!({"scenario_id": scenario, "participant_id": "p01", "group": group})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body
}

async fn register_tiny(app: &axum::Router) {
    let doc: Value = serde_json::from_str(TINY_SCENARIO).unwrap();
    let (status, body) = call(app, "POST", "/scenarios", Some(doc)).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
}

#[tokio::test]
async fn interview_turns_are_persisted_and_replayed() {
    let dir = tempfile::tempdir().unwrap();
    let clock = clock();
    let provider = Arc::new(ScriptedProvider::new(["We groom dogs and cats.", "About forty a week."]));
    let leia = open(dir.path(), provider.clone(), clock.clone());
    let app = router(leia.clone());

    let s = new_session(&app, "session1-grooming", "EG").await;
    assert_eq!(s["mode"], "INTERVIEW");
    assert_eq!(s["state"], "OPEN");
    assert_eq!(s["turn_count"], 0);
    let id = s["id"].as_str().unwrap().to_string();

    let (status, reply) = call(&app, "POST", &format!("/sessions/{id}/messages"), Some(json!({"text": "What animals?"}))).await;
    assert_eq!(status, StatusCode::OK, "{reply}");
    assert_eq!(reply["reply"]["role"], "CLIENT");
    assert_eq!(reply["reply"]["text"], "We groom dogs and cats.");
    assert_eq!(reply["leak_flagged"], false);
    clock.advance(Duration::minutes(3));
    call(&app, "POST", &format!("/sessions/{id}/messages"), Some(json!({"text": "How many visits?"}))).await;

    // the provider saw the scenario's system prompt and the whole history
    let requests = provider.requests();
    assert_eq!(requests[1].messages.len(), 3);
    assert!(requests[0].system_prompt.contains("Pawfect Grooming"));

    let (_, transcript) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    let roles: Vec<&str> = transcript["turns"].as_array().unwrap().iter().map(|t| t["role"].as_str().unwrap()).collect();
    assert_eq!(roles, ["INTERVIEWER", "CLIENT", "INTERVIEWER", "CLIENT"]);

    let before = leia.snapshot();
    drop(app);
    drop(leia);
    let reopened = open(dir.path(), Arc::new(ScriptedProvider::default()), clock);
    assert_eq!(reopened.snapshot(), before);
    let (_, t2) = call(&router(reopened), "GET", &format!("/sessions/{id}/transcript"), None).await;
    assert_eq!(t2, transcript);
}

#[tokio::test]
async fn reading_session_serves_bundled_transcript_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Arc::new(ScriptedProvider::default());
    let app = router(open(dir.path(), provider.clone(), clock()));

    let s = new_session(&app, "session2-bikes", "CG").await;
    assert_eq!(s["mode"], "TRANSCRIPT");
    let id = s["id"].as_str().unwrap();
    let (status, view) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    assert_eq!(status, StatusCode::OK);
    let file = std::fs::read_to_string(scenarios_dir().join("session2-bikes.transcript.txt")).unwrap();
    assert_eq!(view["text"].as_str().unwrap(), file);
    assert_eq!(view["turns"].as_array().unwrap().len(), 24);
    assert!(provider.requests().is_empty());

    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/messages"), Some(json!({"text": "hello"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "wrong_mode");
}

#[tokio::test]
async fn generated_transcript_is_cached_for_later_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Arc::new(ScriptedProvider::new([
        "Engineer: What do you sell?\nClient: Apples, in baskets.\n",
    ]));
    let app = router(open(dir.path(), provider.clone(), clock()));
    register_tiny(&app).await;

    let (_, summary) = call(&app, "GET", "/scenarios/tiny", None).await;
    assert_eq!(summary["has_cached_transcript"], false);
    assert!(summary.get("reference_mermaid").is_none());

    let first = new_session(&app, "tiny", "CG").await;
    let second = new_session(&app, "tiny", "CG").await;
    assert_eq!(provider.requests().len(), 1);
    for s in [&first, &second] {
        let (_, view) = call(&app, "GET", &format!("/sessions/{}/transcript", s["id"].as_str().unwrap()), None).await;
        assert_eq!(view["text"], "Engineer: What do you sell?\nClient: Apples, in baskets.\n");
    }
    assert!(dir.path().join("transcripts/tiny.transcript.txt").is_file());
    let (_, summary) = call(&app, "GET", "/scenarios/tiny", None).await;
    assert_eq!(summary["has_cached_transcript"], true);
}

#[tokio::test]
async fn malformed_generated_transcript_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Arc::new(ScriptedProvider::new(["Client: I speak first, which is wrong.\n"]));
    let app = router(open(dir.path(), provider, clock()));
    register_tiny(&app).await;
    let (status, err) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"scenario_id": "tiny", "participant_id": "p", "group": "CG"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(err["code"], "transcript_error");
    assert!(!dir.path().join("transcripts/tiny.transcript.txt").exists());
}

#[tokio::test]
async fn submission_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(open(dir.path(), Arc::new(ScriptedProvider::default()), clock()));
    register_tiny(&app).await;
    let s = new_session(&app, "tiny", "EG").await;
    let id = s["id"].as_str().unwrap();

    let (status, err) = call(&app, "GET", &format!("/sessions/{id}/evaluation"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "evaluation_not_found");

    let (status, err) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/submission"),
        Some(json!({"mermaid_text": "classDiagram\nclass A {\n  x\n}\nA -> B"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "diagram_parse_error");
    assert_eq!(err["detail"]["line"], 5);
    assert!(err["detail"]["column"].as_u64().unwrap() >= 1);
    let (_, desc) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(desc["state"], "OPEN");

    let (status, report) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/submission"),
        Some(json!({
            "mermaid_text": "classDiagram\nclass A {\n  x\n}",
            "open_question_notes": ["Ask whether baskets are reused."]
        })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{report}");
    // Fe = Fa = 2/3, Fr = 0: 1 + 9 * (0.4 + 0.3) * 2/3 = 5.2
    assert_eq!(report["score"]["value"], 5.2);
    assert_eq!(report["coverage"]["questions"][0]["matched"], true);
    assert!(report["feedback"].as_str().unwrap().contains("Missing entities"));

    let (_, desc) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(desc["state"], "SUBMITTED");
    assert_eq!(desc["late"], false);
    let (_, stored) = call(&app, "GET", &format!("/sessions/{id}/evaluation"), None).await;
    assert_eq!(stored, report);

    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/submission"), Some(json!({"mermaid_text": "classDiagram"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "already_submitted");
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/messages"), Some(json!({"text": "more?"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn deadline_expires_chat_but_still_accepts_a_late_submission() {
    let dir = tempfile::tempdir().unwrap();
    let clock = clock();
    let app = router(open(dir.path(), Arc::new(ScriptedProvider::new(["ok"])), clock.clone()));
    let s = new_session(&app, "session1-grooming", "EG").await;
    let id = s["id"].as_str().unwrap();
    let started: chrono::DateTime<chrono::Utc> = s["started_at"].as_str().unwrap().parse().unwrap();
    let deadline: chrono::DateTime<chrono::Utc> = s["deadline"].as_str().unwrap().parse().unwrap();
    assert_eq!(deadline - started, Duration::minutes(105));

    clock.advance(Duration::minutes(106));
    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/messages"), Some(json!({"text": "still there?"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "session_expired");
    let (_, desc) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(desc["state"], "EXPIRED");

    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/submission"), Some(json!({"mermaid_text": "classDiagram"}))).await;
    assert_eq!(status, StatusCode::OK);
    let (_, desc) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(desc["state"], "SUBMITTED");
    assert_eq!(desc["late"], true);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_messages_on_one_session_admit_exactly_one() {
    let dir = tempfile::tempdir().unwrap();
    let gate = Arc::new(GateProvider::default());
    let app = router(open(dir.path(), gate.clone(), clock()));
    let s = new_session(&app, "session1-grooming", "EG").await;
    let uri = format!("/sessions/{}/messages", s["id"].as_str().unwrap());

    let first = {
        let (app, uri) = (app.clone(), uri.clone());
        tokio::spawn(async move { call(&app, "POST", &uri, Some(json!({"text": "first"}))).await })
    };
    while gate.entered.load(Ordering::SeqCst) == 0 {
        tokio::time::sleep(std::time::Duration::from_millis(2)).await;
    }
    for i in 0..4 {
        let (status, err) = call(&app, "POST", &uri, Some(json!({"text": format!("other {i}")}))).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert_eq!(err["code"], "session_busy");
    }
    gate.release();
    let (status, _) = first.await.unwrap();
    assert_eq!(status, StatusCode::OK);
    assert_eq!(gate.entered.load(Ordering::SeqCst), 1);
    let (_, desc) = call(&app, "GET", &format!("/sessions/{}", s["id"].as_str().unwrap()), None).await;
    assert_eq!(desc["turn_count"], 2);
}

#[tokio::test]
async fn provider_failure_keeps_the_question_for_a_retry() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Arc::new(ScriptedProvider::default());
    let leia = open(dir.path(), provider.clone(), clock());
    let app = router(leia.clone());
    let s = new_session(&app, "session1-grooming", "EG").await;
    let id = s["id"].as_str().unwrap().to_string();
    let uri = format!("/sessions/{id}/messages");

    let (status, err) = call(&app, "POST", &uri, Some(json!({"text": "Who books?"}))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(err["code"], "provider_error");
    let (_, desc) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(desc["awaiting_reply"], true);
    assert_eq!(desc["turn_count"], 1);

    let (status, err) = call(&app, "POST", &uri, Some(json!({"text": "Something else"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "reply_pending");

    // the pending question survives a restart
    let reopened = open(dir.path(), provider.clone(), clock());
    assert_eq!(reopened.snapshot(), leia.snapshot());
    let app = router(reopened);
    provider.push("Usually the owner.");
    let (status, reply) = call(&app, "POST", &uri, Some(json!({"text": "Who books?"}))).await;
    assert_eq!(status, StatusCode::OK, "{reply}");
    let (_, desc) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(desc["turn_count"], 2);
    assert_eq!(desc["awaiting_reply"], false);
}

#[tokio::test]
async fn request_validation() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(open(dir.path(), Arc::new(ScriptedProvider::default()), clock()));

    let (status, err) = call(&app, "POST", "/sessions", Some(json!({"scenario_id": "session1-grooming", "participant_id": "p", "group": "XX"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "invalid_request");
    let (status, err) = call(&app, "POST", "/sessions", Some(json!({"scenario_id": "nope", "participant_id": "p", "group": "EG"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "scenario_not_found");
    let (status, err) = call(&app, "GET", "/sessions/unknown", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "session_not_found");
    assert!(err["message"].is_string());
    assert!(err.get("detail").is_some());

    let s = new_session(&app, "session1-grooming", "EG").await;
    let (status, err) = call(&app, "POST", &format!("/sessions/{}/messages", s["id"].as_str().unwrap()), Some(json!({"text": "   "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "empty_message");
}

#[tokio::test]
async fn scenario_registration() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(open(dir.path(), Arc::new(ScriptedProvider::default()), clock()));

    let (_, list) = call(&app, "GET", "/scenarios", None).await;
    let ids: Vec<&str> = list.as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["session1-grooming", "session2-bikes"]);
    assert!(list[1]["complexity"].is_object());

    let mut bad: Value = serde_json::from_str(TINY_SCENARIO).unwrap();
    bad["open_questions"][0]["keywords"] = json!([]);
    let (status, err) = call(&app, "POST", "/scenarios", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "invalid_scenario");
    assert_eq!(err["detail"]["path"], "open_questions[0].keywords");

    let mut broken: Value = serde_json::from_str(TINY_SCENARIO).unwrap();
    broken["reference_mermaid"] = json!("classDiagram\nA --> ");
    let (_, err) = call(&app, "POST", "/scenarios", Some(broken)).await;
    assert_eq!(err["detail"]["path"], "reference_mermaid");
    assert_eq!(err["detail"]["parse_error"]["line"], 2);

    register_tiny(&app).await;
    let doc: Value = serde_json::from_str(TINY_SCENARIO).unwrap();
    let (status, _) = call(&app, "POST", "/scenarios", Some(doc.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let mut changed = doc;
    changed["brief"] = json!("Something else entirely.");
    let (status, err) = call(&app, "POST", "/scenarios", Some(changed)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "scenario_exists");

    // uploaded scenarios survive a restart
    let reopened = router(open(dir.path(), Arc::new(ScriptedProvider::default()), clock()));
    let (status, _) = call(&reopened, "GET", "/scenarios/tiny", None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn analytics_summarise_submitted_sessions_per_group() {
    let dir = tempfile::tempdir().unwrap();
    let clock = clock();
    let provider = Arc::new(ScriptedProvider::new(["Engineer: Hi?\nClient: Hello.\n"]));
    let app = router(open(dir.path(), provider, clock.clone()));
    register_tiny(&app).await;
    let (status, err) = call(&app, "GET", "/analytics/tiny", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "no_data");

    // (group, minutes, diagram)
    let plan = [
        ("EG", 30, "classDiagram\nclass A {\n  x\n}"),
        ("EG", 60, "classDiagram\nclass A {\n  x\n  z\n}\nclass B {\n  y\n}"),
        ("CG", 45, "classDiagram\nclass A"),
    ];
    for (group, minutes, text) in plan {
        let s = new_session(&app, "tiny", group).await;
        clock.advance(Duration::minutes(minutes));
        let (status, _) = call(&app, "POST", &format!("/sessions/{}/submission", s["id"].as_str().unwrap()), Some(json!({"mermaid_text": text}))).await;
        assert_eq!(status, StatusCode::OK);
    }
    // an unsubmitted session is ignored
    new_session(&app, "tiny", "EG").await;

    let (status, view) = call(&app, "GET", "/analytics/tiny", None).await;
    assert_eq!(status, StatusCode::OK, "{view}");
    let groups = view["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 2);
    let cg = &groups[0];
    assert_eq!(cg["group"], "CG");
    assert_eq!(cg["duration_hours"]["mean"], 0.75);
    assert_eq!(cg["class_count"]["n"], 1);
    let eg = &groups[1];
    assert_eq!(eg["duration_hours"]["n"], 2);
    assert_eq!(eg["duration_hours"]["mean"], 0.75);
    assert_eq!(eg["duration_hours"]["std"], 0.25);
    assert_eq!(eg["class_count"]["mean"], 1.5);
    assert_eq!(eg["attribute_count"]["min"], 1.0);
    assert_eq!(eg["attribute_count"]["max"], 3.0);
}
