use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

use crate::api::ErrorBody;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("{message}")]
    Conflict {
        message: String,
        pending: Option<usize>,
    },
    #[error("{0}")]
    InconsistentAnswer(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::Conflict { .. } => StatusCode::CONFLICT,
            Self::InconsistentAnswer(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::BadRequest(_) => "bad_request",
            Self::NotFound(_) => "not_found",
            Self::Conflict { .. } => "conflict",
            Self::InconsistentAnswer(_) => "inconsistent_answer",
            Self::Internal(_) => "internal",
        }
    }

    /// Errors from loading a session's inputs are the client's fault.
    pub(crate) fn invalid_input(e: alpf_core::Error) -> Self {
        Self::BadRequest(e.to_string())
    }

    pub(crate) fn internal(e: impl std::fmt::Display) -> Self {
        Self::Internal(e.to_string())
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.kind().to_string(),
            message: self.to_string(),
            pending_question_id: match &self {
                Self::Conflict { pending, .. } => *pending,
                _ => None,
            },
        };
        (self.status(), Json(body)).into_response()
    }
}

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;
