//! Scripted HTTP listeners driving the router in-process.

#![allow(dead_code)]

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const REAL_ITEMS: usize = 8;
pub const TRANSCRIPT: &str = "the butter was a wee bit bitter";

pub async fn call_raw(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
    headers: &[(&str, &str)],
) -> (StatusCode, HeaderMap, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, bytes)
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, _, bytes) = call_raw(app, method, uri, body, &[]).await;
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

fn item(test_id: &str, id: &str) -> Value {
    json!({
        "item_id": format!("{test_id}-{id}"),
        "reference_audio_id": format!("{test_id}-{id}-x"),
        "candidate_a_audio_id": format!("{test_id}-{id}-sysA"),
        "candidate_b_audio_id": format!("{test_id}-{id}-sysB"),
        "transcript": TRANSCRIPT,
        "ab_assignment_seed": id.len() as u64,
    })
}

/// Eight real items, two attention items whose same-accent answer is A.
pub fn definition(test_id: &str, show_transcript: bool, require_highlight: bool) -> Value {
    let items: Vec<Value> = (0..REAL_ITEMS).map(|k| item(test_id, &format!("i{k}"))).collect();
    let attention: Vec<Value> = (0..2)
        .map(|j| {
            let mut v = item(test_id, &format!("att{j}"));
            v["expected"] = json!("A");
            v
        })
        .collect();
    json!({
        "test_id": test_id,
        "variant": {"show_transcript": show_transcript, "require_highlight": require_highlight},
        "instructions": "Which of A and B sounds more like X in accent?",
        "items": items,
        "attention_items": attention,
        "aid_question": {
            "prompt": "Where do you think the speaker in X is from?",
            "accepted_keywords": ["scotland", "scottish", "edinburgh", "glasgow", "scots"]
        },
        "target_valid_submissions": 15,
        "seed": 2024,
        "exclusive_group": "scottish-accent-study"
    })
}

/// Runs one listener to completion. `prefers_a(k)` decides real item `k`.
/// Returns the finalize response body.
pub async fn run_listener(
    app: &Router,
    test_id: &str,
    listener: &str,
    prefers_a: impl Fn(usize) -> bool,
    fail_attention: bool,
    aid_answer: &str,
) -> Value {
    let (st, session) = call(
        app,
        Method::POST,
        "/sessions",
        Some(json!({"test_id": test_id, "listener_id": listener, "metadata": {"platform": "prolific"}})),
    )
    .await;
    assert_eq!(st, StatusCode::CREATED, "{session}");
    let token = session["token"].as_str().unwrap().to_string();
    loop {
        let (st, next) = call(app, Method::GET, &format!("/sessions/{token}/next"), None).await;
        assert_eq!(st, StatusCode::OK);
        if next["done"].as_bool().unwrap() {
            break;
        }
        let view = &next["item"];
        let item_id = view["item_id"].as_str().unwrap();
        let short = item_id.rsplit('-').next().unwrap();
        let want_a = match short.strip_prefix("att") {
            Some(_) => !fail_attention,
            None => prefers_a(short[1..].parse().unwrap()),
        };
        let a_slot_is_a = view["a_audio_id"].as_str().unwrap().ends_with("-sysA");
        let screen = if want_a == a_slot_is_a { "A" } else { "B" };
        let highlights = if view["require_highlight"].as_bool().unwrap() {
            json!([{"char_start": 4, "char_end": 10}])
        } else {
            json!([])
        };
        let (st, body) = call(
            app,
            Method::POST,
            &format!("/sessions/{token}/items/{item_id}"),
            Some(json!({"choice": screen, "highlights": highlights, "elapsed_ms": 5000})),
        )
        .await;
        assert_eq!(st, StatusCode::OK, "{body}");
    }
    let (st, body) = call(
        app,
        Method::POST,
        &format!("/sessions/{token}/finalize"),
        Some(json!({"aid_answer": aid_answer})),
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{body}");
    body
}

/// Listener `n` prefers A on real items `k` with `(k + n) % 4 != 0`, i.e. 6 of 8.
pub fn script(n: usize) -> impl Fn(usize) -> bool {
    move |k| (k + n) % 4 != 0
}

pub struct VariantOutcome {
    pub test_id: String,
    pub progress: Value,
    pub aggregate_valid: Value,
    pub aggregate_all: Value,
    pub southern_england_valid: bool,
    pub edinburgh_valid: bool,
}

/// Three variants, 15 valid listeners each, with 3, 2 and 5 rejected listeners.
pub async fn three_variant_study(app: &Router) -> Vec<VariantOutcome> {
    let variants = [("xab", false, false, 3usize), ("xab-trans", true, false, 2), ("xab-trans-hl", true, true, 5)];
    let mut out = Vec::new();
    for (test_id, trans, hl, rejected) in variants {
        let (st, body) = call(app, Method::POST, "/tests", Some(definition(test_id, trans, hl))).await;
        assert_eq!(st, StatusCode::CREATED, "{body}");
        let mut edinburgh_valid = false;
        let mut southern_england_valid = true;
        for n in 0..15 {
            let aid = if n == 0 { "Edinburgh accent" } else { "Scottish" };
            let r = run_listener(app, test_id, &format!("{test_id}-v{n}"), script(n), false, aid).await;
            if n == 0 {
                edinburgh_valid = r["valid"].as_bool().unwrap();
            }
        }
        for n in 0..rejected {
            let (fail_att, aid) = if n == 0 { (false, "Southern England") } else { (n % 2 == 0, "Ireland") };
            let r = run_listener(app, test_id, &format!("{test_id}-x{n}"), |_| false, fail_att, aid).await;
            if n == 0 {
                southern_england_valid = r["valid"].as_bool().unwrap();
            }
        }
        let (_, progress) = call(app, Method::GET, &format!("/tests/{test_id}/progress"), None).await;
        let (_, aggregate_valid) =
            call(app, Method::GET, &format!("/tests/{test_id}/aggregate?only_valid=true"), None).await;
        let (_, aggregate_all) =
            call(app, Method::GET, &format!("/tests/{test_id}/aggregate?only_valid=false"), None).await;
        out.push(VariantOutcome {
            test_id: test_id.to_string(),
            progress,
            aggregate_valid,
            aggregate_all,
            southern_england_valid,
            edinburgh_valid,
        });
    }
    out
}
