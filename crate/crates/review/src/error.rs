use std::path::{Path, PathBuf};

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("unknown candidate {0}")]
    NotFound(String),

    #[error("unknown frame {frame} of {candidate_id}")]
    FrameNotFound { candidate_id: String, frame: usize },

    #[error("candidate {0} was auto-rejected and is not open for review")]
    NotReviewable(String),

    #[error("candidate {candidate_id} is at version {current_version}")]
    Conflict { candidate_id: String, current_version: u64 },

    #[error("bad request: {0}")]
    BadRequest(String),

    #[error("corrupt decision log at byte {offset}: {reason}")]
    CorruptLog { offset: u64, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Core(#[from] occkit_core::Error),
}

impl ReviewError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ReviewError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ReviewError::NotFound(_) | ReviewError::FrameNotFound { .. } => StatusCode::NOT_FOUND,
            ReviewError::NotReviewable(_) | ReviewError::Conflict { .. } => StatusCode::CONFLICT,
            ReviewError::BadRequest(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let mut body = serde_json::json!({ "error": self.to_string() });
        if let ReviewError::Conflict { current_version, .. } = &self {
            body["current_version"] = (*current_version).into();
        }
        (self.status(), Json(body)).into_response()
    }
}

pub type Result<T, E = ReviewError> = std::result::Result<T, E>;
