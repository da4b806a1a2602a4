//! Read-only HTTP API over a sweep artifact.
//!
//! Routes:
//! - `GET /healthz`
//! - `GET /api/sweep?purity=construct|relation`
//! - `GET /api/partition?alpha=A&purity=P`
//! - `GET /api/clusters/{id}?alpha=A&purity=P`
//!
//! `purity` defaults to `construct`. `alpha` is snapped to the nearest point
//! of the artifact's grid and the snapped value is echoed back. Unknown
//! routes fall through to the static UI directory when one is configured.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use gut_core::objective::{PurityKind, SweepResult};
use serde_json::json;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub mod state;
pub mod views;

pub use state::{AppState, LoadError};
use views::{
    cluster_detail, cluster_views, pair_similarities, relation_views, snap, sweep_view, ClusterDetail,
    PartitionView,
};

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    /// Origin allowed by CORS; none means same-origin only.
    pub allow_origin: Option<String>,
    /// Directory of static UI assets served for non-API paths.
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("invalid allowed origin {0:?}")]
    Origin(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

type Shared = Arc<AppState>;
type Params = Query<HashMap<String, String>>;

fn purity(params: &HashMap<String, String>) -> Result<PurityKind, ApiError> {
    match params.get("purity") {
        None => Ok(PurityKind::Construct),
        Some(s) => s.parse().map_err(|e: gut_core::Error| bad_request(e.to_string())),
    }
}

fn alpha(params: &HashMap<String, String>) -> Result<f64, ApiError> {
    let raw = params.get("alpha").ok_or_else(|| bad_request("missing alpha"))?;
    let a: f64 = raw
        .trim()
        .parse()
        .map_err(|_| bad_request(format!("alpha {raw:?} is not a number")))?;
    if !(0.0..=1.0).contains(&a) {
        return Err(bad_request(format!("alpha {raw} outside [0, 1]")));
    }
    Ok(a)
}

fn sweep_for(state: &AppState, kind: PurityKind) -> Result<&SweepResult, ApiError> {
    state
        .artifact
        .sweep(kind)
        .ok_or_else(|| ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("no {kind} sweep")))
}

/// Resolves `alpha` and `purity` to a grid point: (snapped alpha, kind, selection index).
fn selection(state: &AppState, params: &HashMap<String, String>) -> Result<(f64, PurityKind, usize), ApiError> {
    let kind = purity(params)?;
    let a = alpha(params)?;
    let sweep = sweep_for(state, kind)?;
    let i = snap(&sweep.alpha_grid, a);
    Ok((sweep.alpha_grid[i], kind, i))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn api_sweep(State(state): State<Shared>, Query(params): Params) -> Result<Response, ApiError> {
    let kind = purity(&params)?;
    let sweep = sweep_for(&state, kind)?;
    Ok(Json(sweep_view(&state, sweep)).into_response())
}

async fn api_partition(State(state): State<Shared>, Query(params): Params) -> Result<Response, ApiError> {
    let (snapped, kind, i) = selection(&state, &params)?;
    let requested = alpha(&params)?;
    let sel = sweep_for(&state, kind)?.selections[i];
    let record = &state.artifact.candidates[sel.candidate];
    let p = &state.partitions[sel.candidate];
    Ok(Json(PartitionView {
        alpha: requested,
        snapped_alpha: snapped,
        purity: kind,
        candidate: sel.candidate,
        spec: record.spec.clone(),
        summary: record.spec.summary(),
        k: record.k,
        losses: record.losses,
        balanced_loss: sel.balanced_loss,
        clusters: cluster_views(&state, p),
        relations: relation_views(&state, p),
    })
    .into_response())
}

async fn api_cluster(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(params): Params,
) -> Result<Response, ApiError> {
    let (snapped, kind, i) = selection(&state, &params)?;
    let candidate = sweep_for(&state, kind)?.selections[i].candidate;
    let p = &state.partitions[candidate];
    let not_found = || ApiError(StatusCode::NOT_FOUND, format!("no cluster {id:?} in the selected partition"));
    let cid: usize = id.parse().map_err(|_| not_found())?;
    let cluster = cluster_detail(&state, p, cid).ok_or_else(not_found)?;
    Ok(Json(ClusterDetail {
        snapped_alpha: snapped,
        purity: kind,
        candidate,
        similarities: pair_similarities(&state, p, cid),
        cluster,
    })
    .into_response())
}

async fn not_found() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "not found".into())
}

/// Builds the application. GET routes also answer HEAD.
pub fn router(state: AppState, options: &ServerOptions) -> Result<Router, ServeError> {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/api/sweep", get(api_sweep))
        .route("/api/partition", get(api_partition))
        .route("/api/clusters/{id}", get(api_cluster))
        .route("/api/{*rest}", get(not_found))
        .with_state(Arc::new(state));
    let mut app = match &options.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    };
    if let Some(origin) = &options.allow_origin {
        let value = HeaderValue::from_str(origin).map_err(|_| ServeError::Origin(origin.clone()))?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(value)
                .allow_methods([Method::GET, Method::HEAD]),
        );
    }
    Ok(app)
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(app: Router, addr: SocketAddr) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
