//! HTTP+JSON routes over a [`SessionStore`].
//!
//! | method | path | body / response |
//! |---|---|---|
//! | GET | `/health` | `{"status":"ok"}` |
//! | POST | `/datasets` | multipart `csv`, `config`, optional `truth` → [`DatasetInfo`] |
//! | GET | `/datasets/{id}` | [`DatasetInfo`] |
//! | GET | `/datasets/{id}/columns` | `[ColumnSummary]` |
//! | POST | `/sessions` | `{dataset, mode}` → [`Session`] |
//! | GET | `/sessions/{id}` | [`Session`] |
//! | POST | `/sessions/{id}/filters` | [`FilterAction`] → [`MutationResponse`] |
//! | DELETE | `/sessions/{id}/filters/{var}` | [`MutationResponse`] |
//! | GET | `/sessions/{id}/guidance` | [`VariableRanking`] |
//! | GET | `/sessions/{id}/distributions` | [`DistributionPayload`] |
//! | POST | `/sessions/{id}/answers` | [`AnswerSubmission`] → [`AnswerResponse`] |
//! | GET | `/sessions/{id}/analysis` | [`AnalysisReport`] |
//!
//! Errors come back as `{"code", "message"}` with 404 for unknown ids, 400 for
//! malformed requests and 409 for actions that do not fit the session state.
//!
//! [`DatasetInfo`]: crate::session::DatasetInfo
//! [`Session`]: crate::session::Session
//! [`MutationResponse`]: crate::session::MutationResponse
//! [`VariableRanking`]: crate::guidance::VariableRanking
//! [`DistributionPayload`]: crate::session::DistributionPayload
//! [`AnalysisReport`]: crate::metrics::AnalysisReport

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetConfig;
use crate::session::{AnswerSubmission, FilterAction, ServiceError, SessionStore};
use crate::synth::GroundTruth;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Invalid(_) => StatusCode::BAD_REQUEST,
            ServiceError::State(_) => StatusCode::CONFLICT,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

/// Largest accepted dataset upload.
pub const UPLOAD_LIMIT: usize = 256 * 1024 * 1024;

type Shared = Arc<SessionStore>;
type ApiResult = Result<Response, ServiceError>;

/// Runs blocking store work off the async runtime and serializes the result.
async fn blocking<T, F>(store: &Shared, f: F) -> ApiResult
where
    T: Serialize + Send + 'static,
    F: FnOnce(&SessionStore) -> Result<T, ServiceError> + Send + 'static,
{
    let store = store.clone();
    let value = tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(value).into_response())
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::Invalid(e.body_text()))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route(
            "/datasets",
            post(upload_dataset).layer(DefaultBodyLimit::max(UPLOAD_LIMIT)),
        )
        .route("/datasets/{id}", get(dataset_info))
        .route("/datasets/{id}/columns", get(dataset_columns))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/filters", post(mutate_filter))
        .route("/sessions/{id}/filters/{var}", delete(remove_filter))
        .route("/sessions/{id}/guidance", get(guidance))
        .route("/sessions/{id}/distributions", get(distributions))
        .route("/sessions/{id}/answers", post(submit_answers))
        .route("/sessions/{id}/analysis", get(analysis))
        .with_state(store)
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn upload_dataset(State(store): State<Shared>, mut form: Multipart) -> ApiResult {
    let bad = |e: axum::extract::multipart::MultipartError| ServiceError::Invalid(e.body_text());
    let (mut csv, mut config, mut truth) = (None, None, None);
    while let Some(field) = form.next_field().await.map_err(bad)? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(bad)?;
        match name.as_str() {
            "csv" => csv = Some(bytes),
            "config" => config = Some(bytes),
            "truth" => truth = Some(bytes),
            other => return Err(ServiceError::Invalid(format!("unexpected field '{other}'"))),
        }
    }
    let csv = csv.ok_or_else(|| ServiceError::Invalid("missing 'csv' field".into()))?;
    let config = config.ok_or_else(|| ServiceError::Invalid("missing 'config' field".into()))?;
    let config = DatasetConfig::from_json(&String::from_utf8_lossy(&config))?;
    let truth: Option<GroundTruth> = truth
        .map(|t| serde_json::from_slice(&t))
        .transpose()
        .map_err(|e| ServiceError::Invalid(format!("truth: {e}")))?;
    let store = store.clone();
    let info = tokio::task::spawn_blocking(move || store.add_dataset_csv(&csv, config, truth))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn dataset_info(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    blocking(&store, move |s| s.dataset_info(&id)).await
}

async fn dataset_columns(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    blocking(&store, move |s| s.columns(&id)).await
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    dataset: String,
    mode: String,
}

async fn create_session(
    State(store): State<Shared>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult {
    let req = body(payload)?;
    let mode = req.mode.parse().map_err(ServiceError::Invalid)?;
    let s = store.create_session(&req.dataset, mode)?;
    Ok((StatusCode::CREATED, Json(s)).into_response())
}

async fn get_session(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    blocking(&store, move |s| s.session(&id)).await
}

async fn mutate_filter(
    State(store): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<FilterAction>, JsonRejection>,
) -> ApiResult {
    let action = body(payload)?;
    blocking(&store, move |s| s.mutate_filter(&id, action)).await
}

async fn remove_filter(
    State(store): State<Shared>,
    Path((id, variable)): Path<(String, String)>,
) -> ApiResult {
    blocking(&store, move |s| s.mutate_filter(&id, FilterAction::Remove { variable })).await
}

async fn guidance(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    blocking(&store, move |s| s.guidance(&id)).await
}

async fn distributions(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    blocking(&store, move |s| s.distributions(&id)).await
}

async fn submit_answers(
    State(store): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<AnswerSubmission>, JsonRejection>,
) -> ApiResult {
    let answers = body(payload)?;
    blocking(&store, move |s| s.submit_answers(&id, answers)).await
}

async fn analysis(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    blocking(&store, move |s| s.export_analysis(&id)).await
}
