//! HTTP facade over [`evoforge_core::session::Studio`].
//!
//! | method | path                                   | success                          |
//! |--------|----------------------------------------|----------------------------------|
//! | POST   | `/v1/sessions`                         | 201 session + pair               |
//! | GET    | `/v1/sessions/{id}`                    | 200 session                      |
//! | GET    | `/v1/sessions/{id}/audio/{individual}` | 200 `audio/wav`, `ETag`; 304     |
//! | POST   | `/v1/sessions/{id}/judgments`          | 200 session + next pair          |
//! | POST   | `/v1/sessions/{id}/finish`             | 200 `application/octet-stream`   |
//! | GET    | `/v1/sessions/{id}/voicefile`          | 200 `application/octet-stream`   |
//! | DELETE | `/v1/sessions/{id}`                    | 200 session (abandoned)          |
//! | GET    | `/healthz`                             | 200 `ok`                         |
//!
//! Every failure is an [`ApiError`] JSON body.

mod config;
mod error;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use evoforge_core::evolution::IndividualId;
use evoforge_core::session::{NewSession, SessionId, SessionStatus, SessionView, Studio, Submission};
use evoforge_core::voicefile::EXTENSION;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use config::{
    ConfigError, ServiceConfig, DEFAULT_BIND, ENV_BIND, ENV_CORS_ORIGIN, ENV_DEFAULT_TEXT, ENV_PCA_MODEL,
    ENV_PRERENDER, ENV_STORE,
};
pub use error::{ApiError, ErrorCode};

#[derive(Clone)]
pub struct AppState {
    pub studio: Arc<Studio>,
    pub prerender: bool,
}

impl AppState {
    pub fn new(studio: Arc<Studio>) -> Self {
        Self { studio, prerender: false }
    }
}

/// One of the two voices on offer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub individual_id: IndividualId,
    pub audio_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session_id: SessionId,
    pub status: SessionStatus,
    pub generation: u64,
    pub pair: Vec<Candidate>,
    pub text: String,
    pub config: evoforge_core::session::SessionConfig,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voicefile_url: Option<String>,
}

pub fn audio_url(id: &SessionId, individual: IndividualId) -> String {
    format!("/v1/sessions/{id}/audio/{individual}")
}

pub fn voicefile_url(id: &SessionId) -> String {
    format!("/v1/sessions/{id}/voicefile")
}

impl From<SessionView> for SessionResponse {
    fn from(v: SessionView) -> Self {
        let pair = if v.status == SessionStatus::Active {
            v.pair
                .iter()
                .map(|&i| Candidate {
                    individual_id: i,
                    audio_url: audio_url(&v.session_id, i),
                })
                .collect()
        } else {
            Vec::new()
        };
        let voicefile_url = (v.status == SessionStatus::Finished).then(|| voicefile_url(&v.session_id));
        Self {
            status: v.status,
            generation: v.generation,
            pair,
            text: v.text,
            config: v.config,
            created_at: v.created_at,
            updated_at: v.updated_at,
            voicefile_url,
            session_id: v.session_id,
        }
    }
}

pub fn router(state: AppState, cors_origin: Option<&str>) -> Result<Router, ConfigError> {
    let mut app = Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session).delete(abandon_session))
        .route("/v1/sessions/{id}/audio/{individual}", get(get_audio))
        .route("/v1/sessions/{id}/judgments", post(submit_judgment))
        .route("/v1/sessions/{id}/finish", post(finish_session))
        .route("/v1/sessions/{id}/voicefile", get(get_voicefile))
        .fallback(|| async { ApiError::not_found("no such route") })
        .with_state(state);
    if let Some(origin) = cors_origin {
        let origin = HeaderValue::from_str(origin).map_err(|e| ConfigError::Invalid {
            name: ENV_CORS_ORIGIN,
            reason: e.to_string(),
        })?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list([origin]))
                .allow_methods([Method::GET, Method::POST, Method::DELETE])
                .allow_headers([header::CONTENT_TYPE, header::IF_NONE_MATCH])
                .expose_headers([header::ETAG, header::CONTENT_DISPOSITION]),
        );
    }
    Ok(app)
}

/// Builds the studio and router described by `config`.
pub fn app(config: &ServiceConfig) -> Result<Router, ConfigError> {
    let state = AppState {
        studio: Arc::new(config.studio()?),
        prerender: config.prerender,
    };
    router(state, config.cors_origin.as_deref())
}

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let app = app(&config)?;
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("server I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Runs studio work off the async executor.
async fn blocking<T, F>(state: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Studio) -> Result<T, evoforge_core::session::SessionError> + Send + 'static,
{
    let studio = Arc::clone(&state.studio);
    tokio::task::spawn_blocking(move || f(&studio))
        .await
        .map_err(|e| {
            eprintln!("worker task failed: {e}");
            ApiError::new(ErrorCode::Internal, "internal error")
        })?
        .map_err(|e| {
            if let evoforge_core::session::SessionError::Internal(m) = &e {
                eprintln!("internal error: {m}");
            }
            ApiError::from(e)
        })
}

fn prerender(state: &AppState, view: &SessionView) {
    if !state.prerender || view.status != SessionStatus::Active {
        return;
    }
    for individual in view.pair {
        let studio = Arc::clone(&state.studio);
        let id = view.session_id.clone();
        tokio::task::spawn_blocking(move || {
            let _ = studio.audio(&id, individual);
        });
    }
}

fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("invalid request body: {e}")))
}

fn parse_id(raw: &str) -> Result<SessionId, ApiError> {
    raw.parse().map_err(ApiError::from)
}

async fn healthz() -> &'static str {
    "ok"
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: NewSession = parse_body(&body)?;
    let view = blocking(&state, move |s| s.create_session(request)).await?;
    prerender(&state, &view);
    let location = format!("/v1/sessions/{}", view.session_id);
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, location)],
        Json(SessionResponse::from(view)),
    )
        .into_response())
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionResponse>, ApiError> {
    let id = parse_id(&id)?;
    let view = blocking(&state, move |s| s.view(&id)).await?;
    Ok(Json(view.into()))
}

async fn abandon_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionResponse>, ApiError> {
    let id = parse_id(&id)?;
    let view = blocking(&state, move |s| s.abandon(&id)).await?;
    Ok(Json(view.into()))
}

async fn get_audio(
    State(state): State<AppState>,
    Path((id, individual)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let individual = individual
        .parse::<u64>()
        .map(IndividualId)
        .map_err(|_| ApiError::not_found(format!("no individual {individual:?}")))?;
    let audio = blocking(&state, move |s| s.audio(&id, individual)).await?;
    let etag = HeaderValue::from_str(&audio.etag).expect("hex etag is a valid header");
    let cache = HeaderValue::from_static("private, max-age=31536000, immutable");
    let matches = headers
        .get_all(header::IF_NONE_MATCH)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .any(|t| t.trim() == audio.etag || t.trim() == "*");
    if matches {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, etag), (header::CACHE_CONTROL, cache)]).into_response());
    }
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("audio/wav")),
            (header::ETAG, etag),
            (header::CACHE_CONTROL, cache),
        ],
        audio.wav.clone(),
    )
        .into_response())
}

async fn submit_judgment(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionResponse>, ApiError> {
    let id = parse_id(&id)?;
    let submission: Submission =
        serde_json::from_slice(&body).map_err(|e| ApiError::validation(format!("invalid judgment: {e}")))?;
    let view = blocking(&state, move |s| s.submit_judgment(&id, submission)).await?;
    prerender(&state, &view);
    Ok(Json(view.into()))
}

fn voicefile_response(id: &SessionId, bytes: Vec<u8>) -> Response {
    let disposition = format!("attachment; filename=\"voice-{id}.{EXTENSION}\"");
    (
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream")),
            (
                header::CONTENT_DISPOSITION,
                HeaderValue::from_str(&disposition).expect("ascii filename"),
            ),
        ],
        bytes,
    )
        .into_response()
}

async fn finish_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let sid = id.clone();
    let result = blocking(&state, move |s| s.finish_session(&sid).map(|v| v.encode())).await;
    match result {
        Ok(bytes) => Ok(voicefile_response(&id, bytes)),
        Err(e) if e.code == ErrorCode::State => {
            let status = e.detail.as_ref().and_then(|d| d.get("status")).cloned();
            let mut detail = serde_json::json!({ "status": status });
            if status == Some(serde_json::json!("finished")) {
                detail["voicefile_url"] = serde_json::json!(voicefile_url(&id));
            }
            Err(e.with_detail(detail))
        }
        Err(e) => Err(e),
    }
}

async fn get_voicefile(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let sid = id.clone();
    let bytes = blocking(&state, move |s| s.voicefile(&sid).map(|v| v.encode())).await?;
    Ok(voicefile_response(&id, bytes))
}
