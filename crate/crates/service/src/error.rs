use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use evoforge_core::session::{SessionError, SessionStatus};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Closed set of error categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Validation,
    NotFound,
    Conflict,
    State,
    Internal,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
    #[serde(skip)]
    pub status: Option<StatusCode>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        let message = message.into();
        Self {
            code,
            message: if message.is_empty() { format!("{code:?}") } else { message },
            detail: None,
            status: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn with_status(mut self, status: StatusCode) -> Self {
        self.status = Some(status);
        self
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Validation, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn status(&self) -> StatusCode {
        self.status.unwrap_or(match self.code {
            ErrorCode::Validation => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::State => StatusCode::GONE,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        })
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::Validation(_) => Self::new(ErrorCode::Validation, message),
            SessionError::NotFound(_) => Self::new(ErrorCode::NotFound, message),
            SessionError::Conflict(_) => Self::new(ErrorCode::Conflict, message),
            SessionError::State { status, .. } => {
                let err = Self::new(ErrorCode::State, message).with_detail(serde_json::json!({ "status": status }));
                // an active session is not gone, it is just not there yet
                if status == SessionStatus::Active {
                    err.with_status(StatusCode::CONFLICT)
                } else {
                    err
                }
            }
            // internal details stay in the server
            SessionError::Internal(_) => Self::new(ErrorCode::Internal, "internal error"),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(&self)).into_response()
    }
}
