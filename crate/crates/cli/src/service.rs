//! Read-only JSON service over a loaded graph, corpus and index.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kgexplore::corpus::Corpus;
use kgexplore::explore::{
    match_documents, rollup_candidates, rollup_query, subtopic_rank, ConceptQuery, RankedDocument,
    SubtopicSuggestion, DEFAULT_K,
};
use kgexplore::index::InvertedIndex;
use kgexplore::scoring::concept_specificity;
use kgexplore::KnowledgeGraph;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const LISTEN_ENV: &str = "KGEXPLORE_LISTEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Limits {
    pub max_k: usize,
    pub max_concepts: usize,
    pub max_depth: usize,
    pub max_body_bytes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_k: 100, max_concepts: 16, max_depth: 8, max_body_bytes: 16 * 1024 }
    }
}

pub struct AppState {
    pub graph: KnowledgeGraph,
    pub corpus: Corpus,
    pub index: InvertedIndex,
    pub limits: Limits,
}

impl AppState {
    /// Fails when the index was built from a different graph.
    pub fn new(graph: KnowledgeGraph, corpus: Corpus, index: InvertedIndex, limits: Limits) -> CliResult<Self> {
        let loaded = graph.fingerprint();
        let stored = &index.header().graph_fingerprint;
        if !index.is_empty() && *stored != loaded {
            return Err(CliError::new(
                "fingerprint_mismatch",
                format!("index built for graph {stored} but loaded graph is {loaded}"),
            ));
        }
        Ok(AppState { graph, corpus, index, limits })
    }
}

/// Resolves the listen address: explicit flag, then the environment, then the default.
pub fn listen_address(flag: Option<&str>) -> CliResult<SocketAddr> {
    let env = std::env::var(LISTEN_ENV).ok();
    let raw = flag.map(str::to_owned).or(env).unwrap_or_else(|| DEFAULT_LISTEN.to_owned());
    raw.parse()
        .map_err(|e| CliError::usage(format!("invalid listen address {raw:?}: {e}")))
}

struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, kind, message: message.into() }
    }

    fn not_found(kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::NOT_FOUND, kind, message: message.into() }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    kind: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: ErrorDetail { kind: self.kind, message: &self.message } };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Serialize)]
pub struct Health {
    pub status: &'static str,
    pub graph_fingerprint: String,
    pub documents: usize,
    pub entries: usize,
}

async fn health(State(s): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok",
        graph_fingerprint: s.graph.fingerprint(),
        documents: s.corpus.documents.len(),
        entries: s.index.len(),
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct MenuItem {
    pub concept: String,
    pub specificity: f64,
    pub psi_size: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct MentionView {
    pub entity: String,
    pub count: u32,
    /// Roll-up menu for the entity, most specific first.
    pub concepts: Vec<MenuItem>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct DocumentView {
    pub id: String,
    pub title: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    pub mentions: Vec<MentionView>,
}

fn menu(s: &AppState, entity: &str, depth: usize) -> Result<Vec<MenuItem>, ApiError> {
    let concepts = rollup_candidates(&s.graph, entity, depth)
        .map_err(|_| ApiError::not_found("unknown_entity", format!("unknown entity {entity}")))?;
    Ok(concepts
        .into_iter()
        .map(|c| MenuItem {
            concept: s.graph.concept_name(c).to_owned(),
            specificity: concept_specificity(&s.graph, c, depth),
            psi_size: s.graph.psi(c).len(),
        })
        .collect())
}

async fn document(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<DocumentView> {
    let d = s
        .corpus
        .document(&id)
        .ok_or_else(|| ApiError::not_found("unknown_document", format!("unknown document {id}")))?;
    let depth = s.index.params().broaden_depth;
    let mentions = d
        .mentions
        .iter()
        .map(|&(v, count)| {
            let entity = s.graph.entity_name(v).to_owned();
            Ok(MentionView { concepts: menu(&s, &entity, depth)?, entity, count })
        })
        .collect::<Result<_, ApiError>>()?;
    Ok(Json(DocumentView { id: d.id.clone(), title: d.title.clone(), body: d.body.clone(), mentions }))
}

#[derive(Deserialize)]
struct DepthParam {
    depth: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RollupView {
    pub entity: String,
    pub depth: usize,
    pub concepts: Vec<MenuItem>,
}

async fn rollups(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    params: Result<Query<DepthParam>, QueryRejection>,
) -> ApiResult<RollupView> {
    let Query(params) = params.map_err(|e| ApiError::bad_request("bad_request", e.body_text()))?;
    let depth = params.depth.unwrap_or(s.index.params().broaden_depth);
    if depth > s.limits.max_depth {
        return Err(ApiError::bad_request("limit", format!("depth {depth} exceeds {}", s.limits.max_depth)));
    }
    Ok(Json(RollupView { concepts: menu(&s, &id, depth)?, entity: id, depth }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub concepts: Vec<String>,
    pub k: Option<usize>,
}

type Body = Result<Bytes, BytesRejection>;

fn parse_query(s: &AppState, body: Body) -> Result<ConceptQuery, ApiError> {
    // oversized bodies are rejected here as plain bad requests
    let body = body.map_err(|e| ApiError::bad_request("bad_request", e.body_text()))?;
    let req: QueryRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request("bad_request", format!("invalid request body: {e}")))?;
    let k = req.k.unwrap_or(DEFAULT_K);
    if k > s.limits.max_k {
        return Err(ApiError::bad_request("limit", format!("k {k} exceeds {}", s.limits.max_k)));
    }
    if req.concepts.len() > s.limits.max_concepts {
        return Err(ApiError::bad_request(
            "limit",
            format!("{} concepts exceed {}", req.concepts.len(), s.limits.max_concepts),
        ));
    }
    ConceptQuery::new(req.concepts, k).map_err(|e| ApiError::bad_request(e.kind(), e.to_string()))
}

fn warnings(unknown: &[String]) -> Vec<String> {
    unknown.iter().map(|c| format!("unknown concept {c}")).collect()
}

#[derive(Debug, Serialize, PartialEq)]
pub struct QueryResponse {
    pub concepts: Vec<String>,
    pub k: usize,
    pub total_matches: usize,
    pub results: Vec<RankedDocument>,
    pub warnings: Vec<String>,
}

async fn query(State(s): State<Arc<AppState>>, body: Body) -> ApiResult<QueryResponse> {
    let q = parse_query(&s, body)?;
    let matched = match_documents(&s.index, &q);
    Ok(Json(QueryResponse {
        concepts: q.concepts().to_vec(),
        k: q.k(),
        total_matches: matched.documents.len(),
        results: rollup_query(&s.index, &q),
        warnings: warnings(&matched.unknown_concepts),
    }))
}

#[derive(Debug, Serialize, PartialEq)]
pub struct SubtopicResponse {
    pub concepts: Vec<String>,
    pub k: usize,
    pub subtopics: Vec<SubtopicSuggestion>,
    pub warnings: Vec<String>,
}

async fn subtopics(State(s): State<Arc<AppState>>, body: Body) -> ApiResult<SubtopicResponse> {
    let q = parse_query(&s, body)?;
    let matched = match_documents(&s.index, &q);
    Ok(Json(SubtopicResponse {
        concepts: q.concepts().to_vec(),
        k: q.k(),
        subtopics: subtopic_rank(&s.index, &q),
        warnings: warnings(&matched.unknown_concepts),
    }))
}

async fn fallback() -> ApiError {
    ApiError::not_found("not_found", "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.limits.max_body_bytes;
    Router::new()
        .route("/api/health", get(health))
        .route("/api/documents/{id}", get(document))
        .route("/api/entities/{id}/rollups", get(rollups))
        .route("/api/query", post(query))
        .route("/api/subtopics", post(subtopics))
        .fallback(fallback)
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> CliResult<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::new("bind", format!("{addr}: {e}")))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await?;
    Ok(())
}
