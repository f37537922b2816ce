//! Routes of the pgsynth service. Solver work runs on the blocking pool.

use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;

use pgsynth_api::{
    model_hash, ErrorBody, ErrorKind, GenCsRequest, GenCsResponse, Health, RunRequest, RunResponse, BUILD, GEN_CS,
    HEALTH, SOLVE,
};
use pgsynth_core::buchi::{Approach, BuildOptions, DEFAULT_MAX_NODES};
use pgsynth_core::cs::cs_model_text;
use pgsynth_core::pipeline::{run_pipeline, PipelineOptions};
use pgsynth_core::strategy::SynthesisLimits;

/// Largest family member `/v1/gen/cs` produces.
pub const MAX_CS: usize = 64;

pub struct ApiError(ErrorBody);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0.kind {
            ErrorKind::Input => StatusCode::BAD_REQUEST,
            ErrorKind::Budget => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(message = %self.0.message, "request failed");
        }
        (status, Json(self.0)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError(ErrorBody::input(r.body_text()))
    }
}

pub fn router() -> Router {
    Router::new()
        .route(HEALTH, get(health))
        .route(GEN_CS, post(gen_cs))
        .route(BUILD, post(build))
        .route(SOLVE, post(solve))
}

/// Serves until the process ends.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into() })
}

async fn gen_cs(req: Result<Json<GenCsRequest>, JsonRejection>) -> Result<Json<GenCsResponse>, ApiError> {
    let Json(req) = req?;
    if req.n == 0 || req.n > MAX_CS {
        return Err(ApiError(ErrorBody::input(format!("n must be between 1 and {MAX_CS}, got {}", req.n))));
    }
    Ok(Json(GenCsResponse { model: cs_model_text(req.n) }))
}

async fn build(req: Result<Json<RunRequest>, JsonRejection>) -> Result<Json<RunResponse>, ApiError> {
    let Json(req) = req?;
    run(req, false).await
}

async fn solve(req: Result<Json<RunRequest>, JsonRejection>) -> Result<Json<RunResponse>, ApiError> {
    let Json(req) = req?;
    run(req, true).await
}

fn options(req: &RunRequest, solve: bool) -> Result<PipelineOptions, ApiError> {
    let approach: Approach = req.approach.parse().map_err(|e: pgsynth_core::Error| ApiError(ErrorBody::input(e.to_string())))?;
    let positive = |name: &str, v: Option<usize>| match v {
        Some(0) => Err(ApiError(ErrorBody::input(format!("{name} must be positive")))),
        _ => Ok(()),
    };
    positive("max_nodes", req.max_nodes)?;
    positive("max_depth", req.max_depth)?;
    positive("max_strategy_nodes", req.max_strategy_nodes)?;
    let defaults = SynthesisLimits::default();
    Ok(PipelineOptions {
        name: req.name.clone().unwrap_or_else(|| "model".into()),
        approach,
        build: BuildOptions {
            max_nodes: req.max_nodes.unwrap_or(DEFAULT_MAX_NODES),
            timeout: req.timeout_ms.map(Duration::from_millis),
            reverse_successors: false,
        },
        solve,
        synthesize: solve && req.synthesize,
        limits: SynthesisLimits {
            max_depth: req.max_depth.unwrap_or(defaults.max_depth),
            max_nodes: req.max_strategy_nodes.unwrap_or(defaults.max_nodes),
            lasso: defaults.lasso,
        },
        game_dot: req.game_dot,
        ..Default::default()
    })
}

async fn run(req: RunRequest, solve: bool) -> Result<Json<RunResponse>, ApiError> {
    let opts = options(&req, solve)?;
    let hash = model_hash(&req.model);
    let out = tokio::task::spawn_blocking(move || run_pipeline(&req.model, &opts))
        .await
        .map_err(|e| ApiError(ErrorBody { kind: ErrorKind::Internal, stage: None, message: e.to_string(), partial_stats: None }))?
        .map_err(|e| ApiError((&e).into()))?;
    Ok(Json(RunResponse {
        stats: (&out.stats).into(),
        model_hash: hash,
        max_orderings_per_node: out.stats.max_orderings_per_node,
        warnings: out.warnings,
        game_dot: out.game_dot,
        strategy: out.strategy.as_ref().map(Into::into),
    }))
}
