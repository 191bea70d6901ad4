use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use super::{ModelStore, QueryError, RecommendedInput};

type Shared = Arc<ModelStore>;

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error_response(status: StatusCode, message: String) -> Response {
    (status, Json(ErrorBody { error: message })).into_response()
}

impl IntoResponse for QueryError {
    fn into_response(self) -> Response {
        let status = match self {
            QueryError::NotFound(_) => StatusCode::NOT_FOUND,
            QueryError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            QueryError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        error_response(status, self.to_string())
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| {
        error_response(
            StatusCode::BAD_REQUEST,
            format!("invalid request body: {e}"),
        )
    })
}

#[derive(Debug, Deserialize)]
struct CellsQuery {
    region: Option<String>,
}

#[derive(Debug, Deserialize)]
struct PrescribeRequest {
    cell_id: String,
    prescriptor_id: String,
    model_id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct PredictRequest {
    cell_id: String,
    recommended: RecommendedInput,
    model_id: Option<String>,
}

async fn cells(State(store): State<Shared>, Query(q): Query<CellsQuery>) -> Response {
    match store.cells_in(q.region.as_deref()) {
        Ok(v) => Json(v).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn prescriptors(State(store): State<Shared>) -> Response {
    Json(store.prescriptor_summaries()).into_response()
}

async fn models(State(store): State<Shared>) -> Response {
    Json(store.model_ids().collect::<Vec<_>>()).into_response()
}

async fn prescribe(State(store): State<Shared>, body: Bytes) -> Response {
    let req: PrescribeRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    match store.prescribe(&req.cell_id, &req.prescriptor_id, req.model_id.as_deref()) {
        Ok(r) => Json(r).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn predict(State(store): State<Shared>, body: Bytes) -> Response {
    let req: PredictRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    match store.predict(&req.cell_id, &req.recommended, req.model_id.as_deref()) {
        Ok(r) => Json(r).into_response(),
        Err(e) => e.into_response(),
    }
}

const FALLBACK_PAGE: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>landopt</title></head>\
<body><h1>landopt</h1><p>No UI assets found in the store's <code>static/</code> directory.</p>\
<p>API: <a href=\"/api/cells\">/api/cells</a>, <a href=\"/api/prescriptors\">/api/prescriptors</a>, \
POST /api/prescribe, POST /api/predict.</p></body></html>\n";

async fn fallback_page() -> Html<&'static str> {
    Html(FALLBACK_PAGE)
}

/// The API router over a loaded store, with open CORS and the store's
/// `static/` directory (or a placeholder page) at `/`.
pub fn router(store: Arc<ModelStore>) -> Router {
    let api = Router::new()
        .route("/api/cells", get(cells))
        .route("/api/prescriptors", get(prescriptors))
        .route("/api/models", get(models))
        .route("/api/prescribe", post(prescribe))
        .route("/api/predict", post(predict));
    let app = match store.static_dir() {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(fallback_page),
    };
    app.with_state(store).layer(CorsLayer::permissive())
}

/// Serves the store on `addr` until the process is stopped.
pub async fn serve(store: ModelStore, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Arc::new(store))).await
}
