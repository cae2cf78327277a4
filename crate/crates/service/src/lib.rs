//! HTTP interface to the analysis pipeline.
//!
//! * `POST /v1/analyze` runs one analysis and returns the JSON report.
//! * `GET /v1/health` is a liveness probe.
//! * `GET /v1/schema` returns the report JSON schema.
//!
//! The service keeps no state between requests.

use axum::body::Bytes;
use axum::extract::DefaultBodyLimit;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use itsa_core::changepoint::Execution;
use itsa_core::config::AnalysisConfig;
use itsa_core::report::{analyze_csv, analyze_values, report_schema, to_json, Stage, StageError};
use itsa_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;
use tower_http::trace::{DefaultMakeSpan, DefaultOnResponse, TraceLayer};
use tracing::Level;

/// Default request body limit: 1 MiB.
pub const DEFAULT_BODY_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    /// Origins allowed to call the API from a browser. Empty disables CORS.
    pub cors_origins: Vec<String>,
    pub body_limit: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            cors_origins: Vec::new(),
            body_limit: DEFAULT_BODY_LIMIT,
        }
    }
}

/// Body of `POST /v1/analyze`: the data as CSV text or as a list of values,
/// plus the analysis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    pub config: AnalysisConfig,
}

/// Error body. `violations` lists every failed input rule for validation
/// failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub stage: Option<Stage>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<itsa_core::types::Violation>,
}

impl ApiError {
    fn request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST.as_u16(),
            stage: None,
            message: message.into(),
            violations: Vec::new(),
        }
    }
}

impl From<StageError> for ApiError {
    fn from(e: StageError) -> Self {
        let status = if e.is_validation() {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        let violations = match &e.error {
            Error::Validation(v) => v.clone(),
            _ => Vec::new(),
        };
        Self {
            status: status.as_u16(),
            stage: Some(e.stage),
            message: e.to_string(),
            violations,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

/// Runs an analysis request and returns the report as emitted JSON text.
pub fn analyze(req: AnalyzeRequest) -> Result<String, ApiError> {
    let report = match (req.csv, req.values) {
        (Some(csv), None) => analyze_csv(csv.as_bytes(), &req.config, Execution::default()),
        (None, Some(values)) => analyze_values(values, &req.config, Execution::default()),
        _ => return Err(ApiError::request("provide exactly one of `csv` or `values`")),
    }?;
    Ok(to_json(&report))
}

async fn analyze_handler(body: Bytes) -> Result<Response, ApiError> {
    if body.is_empty() {
        return Err(ApiError::request("empty request body"));
    }
    let req: AnalyzeRequest = serde_json::from_slice(&body).map_err(|e| ApiError::request(format!("invalid request: {e}")))?;
    let json = tokio::task::spawn_blocking(move || analyze(req))
        .await
        .map_err(|e| ApiError {
            status: 500,
            stage: None,
            message: format!("analysis task failed: {e}"),
            violations: Vec::new(),
        })??;
    tracing::debug!(bytes = json.len(), "analysis complete");
    Ok(([(header::CONTENT_TYPE, "application/json")], json).into_response())
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn schema() -> Json<serde_json::Value> {
    Json(report_schema())
}

async fn not_found() -> ApiError {
    ApiError {
        status: 404,
        stage: None,
        message: "no such route".into(),
        violations: Vec::new(),
    }
}

pub fn router(cfg: &ServiceConfig) -> Router {
    let mut app = Router::new()
        .route("/v1/analyze", post(analyze_handler))
        .route("/v1/health", get(health))
        .route("/v1/schema", get(schema))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(cfg.body_limit))
        .layer(
            TraceLayer::new_for_http()
                .make_span_with(DefaultMakeSpan::new().level(Level::INFO))
                .on_response(DefaultOnResponse::new().level(Level::INFO)),
        );
    if !cfg.cors_origins.is_empty() {
        let origins: Vec<HeaderValue> = cfg.cors_origins.iter().filter_map(|o| o.parse().ok()).collect();
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origins)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    app
}
