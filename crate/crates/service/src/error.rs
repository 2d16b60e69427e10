use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde_json::{json, Value};
use thiserror::Error;
use treequery::api::RequestError;
use treequery::tree::CorpusError;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown snapshot {0:?}")]
    UnknownSnapshot(String),
    #[error(transparent)]
    Request(#[from] RequestError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("corpus has {nodes} nodes, above the limit of {limit}")]
    CorpusTooLarge { nodes: usize, limit: usize },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("computation exceeded the {0} ms limit")]
    Timeout(u64),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownSnapshot(_) => StatusCode::NOT_FOUND,
            ApiError::Request(_) | ApiError::Corpus(_) | ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::CorpusTooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            ApiError::Timeout(_) => StatusCode::GATEWAY_TIMEOUT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> Value {
        let kind = match self {
            ApiError::Request(e) => return e.to_json(),
            ApiError::UnknownSnapshot(_) => "unknown_snapshot",
            ApiError::Corpus(_) => "malformed_corpus",
            ApiError::CorpusTooLarge { .. } => "corpus_too_large",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Timeout(_) => "timeout",
            ApiError::Internal(_) => "internal",
        };
        json!({"error": kind, "message": self.to_string()})
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), axum::Json(self.body())).into_response()
    }
}
