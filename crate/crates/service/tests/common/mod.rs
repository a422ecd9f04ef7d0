#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use http_body_util::BodyExt;
use leia_core::client_sim::{ChatProvider, ProviderError, ProviderReply, ProviderRequest};
use leia_core::clock::ManualClock;
use serde_json::Value;
use tower::ServiceExt;

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2024, 10, 7, 9, 0, 0).unwrap()))
}

/// Two classes, one attribute each, one plain association.
pub const TINY_SCENARIO: &str = r#"{
  "id": "tiny",
  "brief": "I sell apples and baskets.",
  "reference_mermaid": "classDiagram\nclass A {\n  x\n}\nclass B {\n  y\n}\nA -- B",
  "open_questions": [
    {"id": "q1", "summary": "Are baskets reused?", "keywords": ["reuse", "reused"]}
  ]
}"#;

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json");
    let req = match body {
        Some(v) => req.body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

/// Blocks every completion until released; counts entries.
#[derive(Default)]
pub struct GateProvider {
    pub entered: AtomicUsize,
    open: Mutex<bool>,
    cv: Condvar,
}

impl GateProvider {
    pub fn release(&self) {
        *self.open.lock().unwrap() = true;
        self.cv.notify_all();
    }
}

impl ChatProvider for GateProvider {
    fn name(&self) -> &str {
        "gate"
    }

    fn complete(&self, _request: &ProviderRequest) -> Result<ProviderReply, ProviderError> {
        self.entered.fetch_add(1, Ordering::SeqCst);
        let mut open = self.open.lock().unwrap();
        while !*open {
            open = self.cv.wait(open).unwrap();
        }
        Ok(ProviderReply {
            text: "We mostly sell to families.".into(),
            finish_reason: "stop".into(),
            latency_ms: 0,
        })
    }
}
