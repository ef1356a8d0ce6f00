use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The `error` object of every failed response and failed job.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// Machine-readable code from the originating module's taxonomy.
    pub code: String,
    pub message: String,
    /// Module that raised the error.
    pub module: String,
    /// Offending parameter path, for validation errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{what} {id:?} not found")]
    NotFound { what: &'static str, id: String },
    #[error("{message}")]
    Validation {
        field: Option<String>,
        message: String,
    },
    #[error(transparent)]
    Domain(#[from] gazekit::Error),
    #[error("workspace storage error: {0}")]
    Storage(String),
    /// A failed job's stored error, re-raised.
    #[error("{}", .0.message)]
    Replay(ErrorBody),
}

macro_rules! from_domain {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                ApiError::Domain(e.into())
            }
        }
    )*};
}

from_domain!(
    gazekit::ingest::IngestError,
    gazekit::fixation::FixationError,
    gazekit::cluster::ClusterError,
    gazekit::sequence::SequenceError,
    gazekit::sequence::GeometryError,
    gazekit::stats::StatsError,
    gazekit::render::RenderError
);

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::Storage(e.to_string())
    }
}

/// Codes caused by a malformed request or payload rather than by the data.
const CLIENT_CODES: &[&str] = &[
    "EmptyLog",
    "SchemaError",
    "CorruptLog",
    "InvalidScreen",
    "GeometryError",
    "MetaError",
    "StimulusMismatch",
    "ResponseOutOfSpan",
    "ValidationError",
    "BadWindow",
];

impl ApiError {
    pub fn not_found(what: &'static str, id: impl Into<String>) -> Self {
        ApiError::NotFound {
            what,
            id: id.into(),
        }
    }

    pub fn validation(field: Option<String>, message: impl Into<String>) -> Self {
        ApiError::Validation {
            field,
            message: message.into(),
        }
    }

    pub fn code(&self) -> &str {
        match self {
            ApiError::NotFound { .. } => "NotFound",
            ApiError::Validation { .. } => "ValidationError",
            ApiError::Domain(e) => e.code(),
            ApiError::Storage(_) => "StorageError",
            ApiError::Replay(b) => &b.code,
        }
    }

    pub fn module(&self) -> &str {
        match self {
            ApiError::Domain(e) => e.module(),
            ApiError::Replay(b) => &b.module,
            _ => "service",
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            ApiError::Validation { field, .. } => field.as_deref(),
            ApiError::Replay(b) => b.field.as_deref(),
            _ => None,
        }
    }

    pub fn status(&self) -> StatusCode {
        status_for(self.code())
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
            module: self.module().to_string(),
            field: self.field().map(str::to_owned),
        }
    }
}

pub fn status_for(code: &str) -> StatusCode {
    match code {
        "NotFound" => StatusCode::NOT_FOUND,
        "StorageError" => StatusCode::INTERNAL_SERVER_ERROR,
        c if CLIENT_CODES.contains(&c) => StatusCode::BAD_REQUEST,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

pub fn error_response(status: StatusCode, body: &ErrorBody) -> Response {
    (status, axum::Json(serde_json::json!({ "error": body }))).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        error_response(self.status(), &self.body())
    }
}
