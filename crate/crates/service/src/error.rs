use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

/// Every failure is reported as `{code, message, details}`.
#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("session `{0}` not found")]
    SessionNotFound(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("the configuration violates {} constraint(s)", violated.len())]
    Infeasible { violated: Vec<String> },

    /// The request does not fit the turn protocol (wrong variables, bad values, ...).
    #[error("{message}")]
    Protocol { message: String, details: Value },

    #[error("{message}")]
    Conflict { code: &'static str, message: String },

    #[error("{0}")]
    BadRequest(String),

    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn protocol(message: impl Into<String>, details: Value) -> Self {
        ApiError::Protocol {
            message: message.into(),
            details,
        }
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::Conflict {
            code,
            message: message.into(),
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::SessionNotFound(_) | ApiError::UnknownProblem(_) => StatusCode::NOT_FOUND,
            ApiError::Infeasible { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Protocol { .. } | ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Conflict { .. } => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::SessionNotFound(_) => "session_not_found",
            ApiError::UnknownProblem(_) => "unknown_problem",
            ApiError::Infeasible { .. } => "infeasible",
            ApiError::Protocol { .. } => "protocol_error",
            ApiError::Conflict { code, .. } => code,
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Internal(_) => "internal_error",
        }
    }

    fn details(&self) -> Value {
        match self {
            ApiError::SessionNotFound(id) => json!({ "session": id }),
            ApiError::UnknownProblem(id) => json!({ "problem": id }),
            ApiError::Infeasible { violated } => json!({ "violated": violated }),
            ApiError::Protocol { details, .. } => details.clone(),
            _ => Value::Null,
        }
    }
}

impl From<pcl_core::Error> for ApiError {
    fn from(e: pcl_core::Error) -> Self {
        use pcl_core::Error as E;
        match e {
            E::Infeasible { violated } => ApiError::Infeasible { violated },
            E::Domain { ref variable, value } => {
                ApiError::protocol(e.to_string(), json!({ "variable": variable, "value": value }))
            }
            E::Invalid { ref path, .. } => ApiError::protocol(e.to_string(), json!({ "path": path })),
            E::PartMismatch { .. } | E::Arity { .. } | E::Conflict { .. } | E::Protocol(_) => {
                ApiError::protocol(e.to_string(), Value::Null)
            }
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::Internal(format!("journal: {e}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "code": self.code(),
            "message": self.to_string(),
            "details": self.details(),
        });
        (self.status(), Json(body)).into_response()
    }
}
