use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use kgexplore::corpus::{ingest_documents, Corpus};
use kgexplore::explore::{rollup_query, subtopic_rank, ConceptQuery};
use kgexplore::index::{build_index, InvertedIndex};
use kgexplore::scoring::ScoringParams;
use kgexplore::synth::{gen_synthetic, SynthParams};
use kgexplore::{load_graph, KnowledgeGraph};
use kgexplore_cli::service::{listen_address, router, AppState, Limits, LISTEN_ENV};
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture_params() -> SynthParams {
    SynthParams { instance_count: 80, concept_count: 9, document_count: 16, seed: 5, ..SynthParams::default() }
}

fn fixture() -> (KnowledgeGraph, Corpus, InvertedIndex) {
    let data = gen_synthetic(&fixture_params()).unwrap();
    let g = load_graph(data.nodes_tsv.as_bytes(), data.edges_tsv.as_bytes()).unwrap();
    let corpus = ingest_documents(data.documents_jsonl.as_bytes(), &g).unwrap();
    let ix = build_index(&g, &corpus, &ScoringParams { seed: 3, ..ScoringParams::default() }).unwrap();
    (g, corpus, ix)
}

fn app() -> Router {
    let (g, corpus, ix) = fixture();
    router(Arc::new(AppState::new(g, corpus, ix, Limits::default()).unwrap()))
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let req = Request::post(uri).header("content-type", "application/json").body(body.into()).unwrap();
    call(app, req).await
}

/// Compares against `tests/golden/<name>.json`; set KGEXPLORE_UPDATE_GOLDEN=1 to rewrite.
fn golden(name: &str, got: &Value) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.json"));
    if std::env::var_os("KGEXPLORE_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(got).unwrap() + "\n").unwrap();
    }
    let want: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(got, &want, "golden {name}");
}

#[tokio::test]
async fn health_reports_ok() {
    let app = app();
    let (status, body) = get(&app, "/api/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    golden("health", &body);
}

#[tokio::test]
async fn document_view_lists_mentions_and_menus() {
    let app = app();
    let (status, body) = get(&app, "/api/documents/doc0003").await;
    assert_eq!(status, StatusCode::OK);
    golden("document_doc0003", &body);
    for m in body["mentions"].as_array().unwrap() {
        let entity = m["entity"].as_str().unwrap();
        let (_, r) = get(&app, &format!("/api/entities/{entity}/rollups")).await;
        assert_eq!(r["concepts"], m["concepts"]);
    }
    let (status, body) = get(&app, "/api/documents/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["kind"], "unknown_document");
}

#[tokio::test]
async fn rollups_endpoint() {
    let app = app();
    let (g, _, _) = fixture();
    let entity = g.psi(g.concept("C8").unwrap())[0];
    let name = g.entity_name(entity);
    let (status, body) = get(&app, &format!("/api/entities/{name}/rollups?depth=2")).await;
    assert_eq!(status, StatusCode::OK);
    golden("rollups", &body);
    let menu: Vec<&str> = body["concepts"].as_array().unwrap().iter().map(|c| c["concept"].as_str().unwrap()).collect();
    let want: Vec<&str> = kgexplore::explore::rollup_candidates(&g, name, 2)
        .unwrap()
        .into_iter()
        .map(|c| g.concept_name(c))
        .collect();
    assert_eq!(menu, want);

    assert_eq!(get(&app, "/api/entities/nope/rollups").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, &format!("/api/entities/{name}/rollups?depth=99")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, &format!("/api/entities/{name}/rollups?depth=x")).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn query_matches_library_and_golden() {
    let app = app();
    let (_, _, ix) = fixture();
    let (status, body) = post(&app, "/api/query", json!({"concepts": ["C2"], "k": 5}).to_string()).await;
    assert_eq!(status, StatusCode::OK);
    golden("query_c2", &body);
    let q = ConceptQuery::new(["C2"], 5).unwrap();
    assert_eq!(body["results"], serde_json::to_value(rollup_query(&ix, &q)).unwrap());
    assert!(body["warnings"].as_array().unwrap().is_empty());
    assert!(!body["results"].as_array().unwrap().is_empty());

    // identical requests, identical bodies
    let (_, again) = post(&app, "/api/query", json!({"concepts": ["C2"], "k": 5}).to_string()).await;
    assert_eq!(again, body);
}

#[tokio::test]
async fn unknown_concept_is_a_warning() {
    let app = app();
    let (status, body) = post(&app, "/api/query", json!({"concepts": ["C2", "Nope"]}).to_string()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["results"], json!([]));
    assert_eq!(body["warnings"], json!(["unknown concept Nope"]));
    assert_eq!(body["k"], 10);
}

#[tokio::test]
async fn subtopics_match_library_and_golden() {
    let app = app();
    let (_, _, ix) = fixture();
    let (status, body) = post(&app, "/api/subtopics", json!({"concepts": ["C0"], "k": 4}).to_string()).await;
    assert_eq!(status, StatusCode::OK);
    golden("subtopics_c0", &body);
    let q = ConceptQuery::new(["C0"], 4).unwrap();
    assert_eq!(body["subtopics"], serde_json::to_value(subtopic_rank(&ix, &q)).unwrap());
    for s in body["subtopics"].as_array().unwrap() {
        let prod = s["coverage"].as_f64().unwrap() * s["specificity"].as_f64().unwrap() * s["diversity"].as_f64().unwrap();
        assert!((prod - s["sbr"].as_f64().unwrap()).abs() <= 1e-9);
    }
    let (status, body) = post(&app, "/api/subtopics", json!({"concepts": ["Nope"]}).to_string()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["subtopics"], json!([]));
}

#[tokio::test]
async fn malformed_and_oversized_requests_are_rejected() {
    let app = app();
    for body in [
        "not json".to_owned(),
        json!({"concepts": []}).to_string(),
        json!({"concepts": ["C1", "C1"]}).to_string(),
        json!({"concepts": ["C1"], "k": 0}).to_string(),
        json!({"concepts": ["C1"], "k": 101}).to_string(),
        json!({"concepts": ["C1"], "extra": true}).to_string(),
        json!({"concepts": (0..17).map(|i| format!("C{i}")).collect::<Vec<_>>()}).to_string(),
        json!({"concepts": ["x".repeat(20_000)]}).to_string(),
    ] {
        let (status, resp) = post(&app, "/api/query", body.clone()).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{}", &body[..body.len().min(80)]);
        assert!(resp["error"]["kind"].is_string());
        assert_eq!(post(&app, "/api/subtopics", body).await.0, StatusCode::BAD_REQUEST);
    }
    assert_eq!(get(&app, "/api/unknown").await.0, StatusCode::NOT_FOUND);
}

#[test]
fn fingerprint_mismatch_names_both() {
    let (g, corpus, ix) = fixture();
    let other = gen_synthetic(&SynthParams { seed: 99, ..fixture_params() }).unwrap();
    let g2 = load_graph(other.nodes_tsv.as_bytes(), other.edges_tsv.as_bytes()).unwrap();
    let (stored, loaded) = (ix.header().graph_fingerprint.clone(), g2.fingerprint());
    assert_ne!(stored, loaded);
    let err = AppState::new(g2, corpus, ix, Limits::default()).err().unwrap();
    assert_eq!(err.kind, "fingerprint_mismatch");
    assert!(err.message.contains(&stored) && err.message.contains(&loaded), "{}", err.message);
    let (_, corpus, ix) = fixture();
    assert!(AppState::new(g, corpus, ix, Limits::default()).is_ok());
}

#[test]
fn listen_address_precedence() {
    std::env::set_var(LISTEN_ENV, "127.0.0.1:9911");
    assert_eq!(listen_address(None).unwrap().port(), 9911);
    assert_eq!(listen_address(Some("0.0.0.0:7000")).unwrap().port(), 7000);
    std::env::set_var(LISTEN_ENV, "nonsense");
    assert_eq!(listen_address(None).unwrap_err().kind, "usage");
    std::env::remove_var(LISTEN_ENV);
    assert_eq!(listen_address(None).unwrap().port(), 8080);
}
