use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use tilesight_core::api::{ErrorBody, FieldError};
use tilesight_core::Error;

use crate::json_response;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: message.into(),
                fields: Vec::new(),
            },
        }
    }

    pub fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        let (path, message) = (path.into(), message.into());
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                error: format!("invalid {path}: {message}"),
                fields: vec![FieldError { path, message }],
            },
        }
    }

    pub fn schema(err: serde_path_to_error::Error<serde_json::Error>) -> Self {
        let path = err.path().to_string();
        let inner = err.into_inner();
        // a syntax error has no meaningful path
        if inner.is_syntax() || inner.is_eof() {
            return ApiError::new(StatusCode::BAD_REQUEST, format!("malformed JSON: {inner}"));
        }
        ApiError::field(path, inner.to_string())
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownTemplate(_) => ApiError::new(StatusCode::NOT_FOUND, e.to_string()),
            Error::Invalid { field, reason } => ApiError::field(field, reason),
            Error::UnknownSpec(_)
            | Error::UnknownShape(_)
            | Error::DegeneratePolygon(_)
            | Error::NonConvex
            | Error::VertexCountMismatch { .. }
            | Error::Image(_) => ApiError::new(StatusCode::BAD_REQUEST, e.to_string()),
            other => {
                tracing::error!("request failed: {other}");
                ApiError::internal(other.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.status, &self.body)
    }
}
