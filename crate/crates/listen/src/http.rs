//! JSON-over-HTTP API.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::ListenError;
use crate::model::{Choice, HighlightSpan, ScreeningOverride, TestDefinition};
use crate::service::ListenService;

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<ListenService>,
    /// Directory holding `<audio_id>.wav`; audio routes answer 404 without it.
    pub audio_dir: Option<PathBuf>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/tests", post(create_test))
        .route("/tests/{test_id}/aggregate", get(aggregate))
        .route("/tests/{test_id}/progress", get(progress))
        .route("/sessions", post(create_session))
        .route("/sessions/{token}/next", get(next_item))
        .route("/sessions/{token}/items/{item_id}", post(submit_item))
        .route("/sessions/{token}/finalize", post(finalize))
        .route("/submissions/{submission_id}/override", post(override_screening))
        .route("/audio/{audio_id}", get(audio))
        .with_state(state)
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    message: String,
}

pub struct ApiError {
    status: StatusCode,
    kind: String,
    message: String,
}

impl From<ListenError> for ApiError {
    fn from(e: ListenError) -> Self {
        let status = match e {
            ListenError::NotFound(_) => StatusCode::NOT_FOUND,
            ListenError::Conflict(_) | ListenError::State(_) => StatusCode::CONFLICT,
            ListenError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ListenError::Io(_) | ListenError::CorruptLog { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{e}");
        }
        ApiError {
            status,
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError {
            status: r.status(),
            kind: "bad_request".into(),
            message: r.body_text(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.kind,
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn create_test(
    State(st): State<AppState>,
    body: Result<Json<TestDefinition>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(def) = body?;
    let test_id = def.test_id.clone();
    st.service.create_test(def)?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "test_id": test_id }))))
}

#[derive(Debug, Deserialize)]
struct NewSession {
    test_id: String,
    listener_id: String,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

async fn create_session(
    State(st): State<AppState>,
    body: Result<Json<NewSession>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let info = st
        .service
        .create_session_with(&req.test_id, &req.listener_id, req.metadata)?;
    Ok((StatusCode::CREATED, Json(info)))
}

async fn next_item(State(st): State<AppState>, Path(token): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(st.service.next_item(&token)?))
}

#[derive(Debug, Deserialize)]
struct ItemRequest {
    /// Slot clicked on screen.
    choice: Choice,
    #[serde(default)]
    highlights: Vec<HighlightSpan>,
    #[serde(default)]
    elapsed_ms: u64,
}

async fn submit_item(
    State(st): State<AppState>,
    Path((token, item_id)): Path<(String, String)>,
    body: Result<Json<ItemRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let ans = st
        .service
        .submit_item(&token, &item_id, req.choice, &req.highlights, req.elapsed_ms)?;
    // the underlying choice stays server-side
    Ok(Json(serde_json::json!({
        "item_id": ans.item_id,
        "highlights": ans.highlights,
    })))
}

#[derive(Debug, Deserialize)]
struct FinalizeRequest {
    #[serde(default)]
    aid_answer: String,
}

async fn finalize(
    State(st): State<AppState>,
    Path(token): Path<String>,
    body: Result<Json<FinalizeRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let sub = st.service.finalize(&token, &req.aid_answer)?;
    Ok(Json(serde_json::json!({
        "submission_id": sub.submission_id,
        "valid": sub.is_valid(),
    })))
}

async fn override_screening(
    State(st): State<AppState>,
    Path(submission_id): Path<String>,
    body: Result<Json<ScreeningOverride>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    Ok(Json(st.service.override_screening(&submission_id, req)?))
}

#[derive(Debug, Deserialize)]
struct AggregateQuery {
    #[serde(default = "yes")]
    only_valid: bool,
}

fn yes() -> bool {
    true
}

async fn aggregate(
    State(st): State<AppState>,
    Path(test_id): Path<String>,
    Query(q): Query<AggregateQuery>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(st.service.aggregate(&test_id, q.only_valid)?))
}

async fn progress(State(st): State<AppState>, Path(test_id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(st.service.progress(&test_id)?))
}

/// Accepts plain file stems such as `p252_005-xtts`; anything path-like is refused.
pub fn sanitize_audio_id(id: &str) -> Option<&str> {
    let ok = !id.is_empty()
        && id.len() <= 200
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    ok.then(|| id.strip_suffix(".wav").unwrap_or(id))
}

/// Single `bytes=a-b`, `bytes=a-` or `bytes=-n` range; `Err` when unsatisfiable.
pub fn parse_range(value: &str, len: u64) -> Option<Result<(u64, u64), ()>> {
    let spec = value.trim().strip_prefix("bytes=")?;
    if spec.contains(',') {
        return None;
    }
    let (a, b) = spec.split_once('-')?;
    let (a, b) = (a.trim(), b.trim());
    let range = if a.is_empty() {
        let n: u64 = b.parse().ok()?;
        if n == 0 || len == 0 {
            return Some(Err(()));
        }
        (len.saturating_sub(n), len - 1)
    } else {
        let start: u64 = a.parse().ok()?;
        let end = if b.is_empty() { u64::MAX } else { b.parse().ok()? };
        if start >= len || end < start {
            return Some(Err(()));
        }
        (start, end.min(len - 1))
    };
    Some(Ok(range))
}

async fn audio(State(st): State<AppState>, Path(audio_id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let not_found = || ApiError::from(ListenError::NotFound(format!("audio {audio_id:?}")));
    let dir = st.audio_dir.as_ref().ok_or_else(not_found)?;
    let stem = sanitize_audio_id(&audio_id).ok_or_else(|| ApiError {
        status: StatusCode::BAD_REQUEST,
        kind: "bad_request".into(),
        message: format!("invalid audio id {audio_id:?}"),
    })?;
    let bytes = match tokio::fs::read(dir.join(format!("{stem}.wav"))).await {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(not_found()),
        Err(e) => return Err(ListenError::Io(e).into()),
    };
    let len = bytes.len() as u64;
    let range = headers
        .get(header::RANGE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| parse_range(v, len));
    let resp = match range {
        None => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "audio/wav".to_string()), (header::ACCEPT_RANGES, "bytes".into())],
            bytes,
        )
            .into_response(),
        Some(Ok((start, end))) => (
            StatusCode::PARTIAL_CONTENT,
            [
                (header::CONTENT_TYPE, "audio/wav".to_string()),
                (header::ACCEPT_RANGES, "bytes".into()),
                (header::CONTENT_RANGE, format!("bytes {start}-{end}/{len}")),
            ],
            bytes[start as usize..=end as usize].to_vec(),
        )
            .into_response(),
        Some(Err(())) => (
            StatusCode::RANGE_NOT_SATISFIABLE,
            [(header::CONTENT_RANGE, format!("bytes */{len}"))],
        )
            .into_response(),
    };
    Ok(resp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audio_ids() {
        assert_eq!(sanitize_audio_id("p252_005-xtts"), Some("p252_005-xtts"));
        assert_eq!(sanitize_audio_id("p252_005.wav"), Some("p252_005"));
        assert_eq!(sanitize_audio_id("../etc/passwd"), None);
        assert_eq!(sanitize_audio_id(".hidden"), None);
        assert_eq!(sanitize_audio_id("a/b"), None);
        assert_eq!(sanitize_audio_id(""), None);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("bytes=0-9", 100), Some(Ok((0, 9))));
        assert_eq!(parse_range("bytes=90-", 100), Some(Ok((90, 99))));
        assert_eq!(parse_range("bytes=-10", 100), Some(Ok((90, 99))));
        assert_eq!(parse_range("bytes=50-500", 100), Some(Ok((50, 99))));
        assert_eq!(parse_range("bytes=100-", 100), Some(Err(())));
        assert_eq!(parse_range("bytes=9-3", 100), Some(Err(())));
        assert_eq!(parse_range("bytes=0-1,4-5", 100), None);
        assert_eq!(parse_range("items=0-1", 100), None);
    }
}
