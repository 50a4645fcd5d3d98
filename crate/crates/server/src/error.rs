use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use coilstack_core::{DutyVector, Error};
use serde::{Deserialize, Serialize};

/// JSON error payload of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duties: Option<DutyVector>,
}

#[derive(Debug)]
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::SingularPoint { .. } => "singular_point",
        Error::InsideWinding { .. } => "inside_winding",
        Error::OutOfWorkspace { .. } => "out_of_workspace",
        Error::OutOfGrid { .. } => "out_of_grid",
        Error::Infeasible { .. } => "infeasible",
        Error::EmptyTrajectory => "empty_trajectory",
        Error::InvalidInput(_) => "invalid_input",
        Error::Format(_) | Error::BadSync(_) | Error::BadChecksum { .. } | Error::BadLength { .. } => {
            "format"
        }
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0 {
            Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let (residual, duties) = match &self.0 {
            Error::Infeasible { residual, duties } => (Some(*residual), Some(*duties)),
            _ => (None, None),
        };
        let body = ErrorBody {
            error: kind(&self.0).to_owned(),
            message: self.0.to_string(),
            residual,
            duties,
        };
        (status, Json(body)).into_response()
    }
}
