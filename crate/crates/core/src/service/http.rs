//! HTTP/JSON routes over an [`Engine`].
//!
//! Errors are JSON objects `{"error": <class>, "message": <text>}` except
//! revision conflicts, which answer `409 {"current_revision": n}`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{
    CaptureKind, CapturePayload, Engine, ErrorClass, MutationEnvelope, NewProject, ServiceError,
};
use crate::asset::PutOutcome;
use crate::canonical;
use crate::model::{CardId, CardKey, ProjectId};

/// Request bodies may carry base64 screenshots and page archives.
pub const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if let ServiceError::RevisionConflict { current } = self {
            let body = serde_json::json!({ "current_revision": current });
            return (StatusCode::CONFLICT, Json(body)).into_response();
        }
        let (status, class) = match self.class() {
            ErrorClass::Validation => (StatusCode::BAD_REQUEST, "validation"),
            ErrorClass::NotFound => (StatusCode::NOT_FOUND, "not_found"),
            ErrorClass::Conflict => (StatusCode::CONFLICT, "conflict"),
            ErrorClass::Engine => (StatusCode::BAD_GATEWAY, "engine_failure"),
            ErrorClass::Unsupported => (StatusCode::NOT_IMPLEMENTED, "unsupported"),
            ErrorClass::Internal => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %self, "request failed");
        }
        let body = serde_json::json!({ "error": class, "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

type Reply = Result<Response, ServiceError>;

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body)
        .map_err(|e| ServiceError::BadRequest(format!("malformed JSON body: {e}")))
}

fn json<T: serde::Serialize>(status: StatusCode, value: &T) -> Response {
    (status, Json(value)).into_response()
}

fn project_id(raw: &str) -> ProjectId {
    ProjectId::from(raw)
}

/// The ETag for a body: its quoted SHA-256.
fn etag_of(body: &[u8]) -> String {
    format!("\"{}\"", canonical::sha256_hex(body))
}

fn not_modified(headers: &HeaderMap, etag: &str) -> bool {
    headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag))
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/import", post(import_project))
        .route("/projects/{id}/overview", get(overview))
        .route("/projects/{id}/reader", get(reader))
        .route("/projects/{id}/mutations", post(mutate))
        .route("/projects/{id}/capture/{kind}", post(capture))
        .route("/projects/{id}/export", get(export))
        .route("/projects/{id}/stats", get(project_stats))
        .route("/cards/{key}/peek", get(peek))
        .route("/assets", post(put_asset))
        .route("/assets/{hash}", get(get_asset))
        .route("/corpus/report", get(corpus_report))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(engine)
}

/// Serves the API on `addr` until `shutdown` resolves.
pub async fn serve(
    engine: Arc<Engine>,
    addr: SocketAddr,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn create_project(State(engine): State<Arc<Engine>>, body: Bytes) -> Reply {
    let req: NewProject = parse_json(&body)?;
    Ok(json(
        StatusCode::CREATED,
        &engine.create_project(&req.name)?,
    ))
}

async fn list_projects(State(engine): State<Arc<Engine>>) -> Reply {
    Ok(json(StatusCode::OK, &engine.list_projects()))
}

async fn import_project(State(engine): State<Arc<Engine>>, body: Bytes) -> Reply {
    Ok(json(StatusCode::CREATED, &engine.import(&body)?))
}

async fn overview(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Reply {
    Ok(json(StatusCode::OK, &engine.overview(&project_id(&id))?))
}

#[derive(Debug, Deserialize)]
struct ReaderQuery {
    root: Option<String>,
}

/// Accepts a bare card number or a full `<project>:<card>` key naming the
/// same project.
fn card_in_project(project: &ProjectId, raw: &str) -> Result<CardId, ServiceError> {
    if let Ok(n) = raw.parse::<u64>() {
        return Ok(CardId(n));
    }
    match raw.parse::<CardKey>() {
        Ok(key) if key.project == *project => Ok(key.card),
        Ok(key) => Err(ServiceError::BadRequest(format!(
            "card {key} belongs to another project"
        ))),
        Err(()) => Err(ServiceError::BadRequest(format!(
            "malformed card reference `{raw}`"
        ))),
    }
}

async fn reader(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    Query(query): Query<ReaderQuery>,
) -> Reply {
    let id = project_id(&id);
    let root = query
        .root
        .as_deref()
        .filter(|r| !r.is_empty())
        .map(|r| card_in_project(&id, r))
        .transpose()?;
    Ok(json(StatusCode::OK, &engine.reader(&id, root)?))
}

async fn peek(State(engine): State<Arc<Engine>>, Path(key): Path<String>) -> Reply {
    let key: CardKey = key
        .parse()
        .map_err(|()| ServiceError::BadRequest(format!("malformed card key `{key}`")))?;
    Ok(json(StatusCode::OK, &engine.peek(&key)?))
}

async fn mutate(State(engine): State<Arc<Engine>>, Path(id): Path<String>, body: Bytes) -> Reply {
    let envelope: MutationEnvelope = parse_json(&body)?;
    Ok(json(
        StatusCode::OK,
        &engine.apply(&project_id(&id), &envelope)?,
    ))
}

async fn capture(
    State(engine): State<Arc<Engine>>,
    Path((id, kind)): Path<(String, String)>,
    body: Bytes,
) -> Reply {
    let kind: CaptureKind = kind.parse()?;
    let payload: CapturePayload = parse_json(&body)?;
    let applied = engine.capture(&project_id(&id), kind, payload)?;
    let mut response = json(StatusCode::CREATED, &applied.result);
    response
        .headers_mut()
        .insert("x-revision", HeaderValue::from(applied.revision));
    Ok(response)
}

async fn export(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Reply {
    let body = engine.export(&project_id(&id))?;
    let etag = etag_of(&body);
    let etag_value = HeaderValue::from_str(&etag).expect("hex etag is a valid header");
    if not_modified(&headers, &etag) {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, etag_value)]).into_response());
    }
    Ok((
        StatusCode::OK,
        [
            (
                header::CONTENT_TYPE,
                HeaderValue::from_static("application/json"),
            ),
            (header::ETAG, etag_value),
        ],
        body,
    )
        .into_response())
}

async fn project_stats(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Reply {
    Ok(json(StatusCode::OK, &engine.stats(&project_id(&id))?))
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn corpus_report(
    State(engine): State<Arc<Engine>>,
    Query(query): Query<ReportQuery>,
) -> Reply {
    let report = engine.corpus_report();
    match query.format.as_deref() {
        None | Some("json") => Ok(json(StatusCode::OK, &report)),
        Some("csv") => Ok((
            StatusCode::OK,
            [(header::CONTENT_TYPE, "text/csv; charset=utf-8")],
            report.to_csv(),
        )
            .into_response()),
        Some(other) => Err(ServiceError::BadRequest(format!(
            "unknown report format `{other}`"
        ))),
    }
}

async fn put_asset(State(engine): State<Arc<Engine>>, headers: HeaderMap, body: Bytes) -> Reply {
    let media_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.split(';').next())
        .map(str::trim)
        .unwrap_or("application/octet-stream");
    let (hash, outcome) = engine.put_asset(&body, media_type)?;
    let asset = engine.get_asset(hash.as_str())?;
    let status = match outcome {
        PutOutcome::Stored => StatusCode::CREATED,
        PutOutcome::AlreadyPresent => StatusCode::OK,
    };
    let body = serde_json::json!({
        "hash": hash,
        "media_type": asset.media_type,
        "byte_length": asset.bytes.len(),
    });
    Ok(json(status, &body))
}

async fn get_asset(
    State(engine): State<Arc<Engine>>,
    Path(hash): Path<String>,
    headers: HeaderMap,
) -> Reply {
    let asset = engine.get_asset(&hash)?;
    let etag = format!("\"{}\"", asset.hash);
    let etag_value = HeaderValue::from_str(&etag).expect("hex etag is a valid header");
    if not_modified(&headers, &etag) {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, etag_value)]).into_response());
    }
    let content_type = HeaderValue::from_str(&asset.media_type)
        .unwrap_or_else(|_| HeaderValue::from_static("application/octet-stream"));
    Ok((
        StatusCode::OK,
        [
            (header::CONTENT_TYPE, content_type),
            (header::ETAG, etag_value),
            (
                header::CACHE_CONTROL,
                HeaderValue::from_static("public, max-age=31536000, immutable"),
            ),
        ],
        asset.bytes.to_vec(),
    )
        .into_response())
}
