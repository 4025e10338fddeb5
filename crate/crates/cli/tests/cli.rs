use std::path::Path;
use std::process::{Command, Output};

use kgexplore::explore::ConceptQuery;
use kgexplore::index::InvertedIndex;
use kgexplore_cli::commands::{query_table, subtopic_table};

fn kgexplore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgexplore"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = kgexplore(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) {
    ok(&["gen-synth", "--out", s(dir), "--seed", "4", "--instances", "150", "--concepts", "12", "--documents", "24"]);
}

fn build(dir: &Path, out: &Path) {
    let docs = dir.join("docs.jsonl");
    ok(&["build-index", "--graph", s(dir), "--docs", s(&docs), "--out", s(out), "--seed", "7"]);
}

#[test]
fn build_is_deterministic_and_query_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    for f in ["nodes.tsv", "edges.tsv", "docs.jsonl", "ledger.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let (a, b) = (dir.join("a.ncex"), dir.join("b.ncex"));
    build(dir, &a);
    build(dir, &b);
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let ix = InvertedIndex::from_bytes(&bytes).unwrap();
    let concept = ix.entries()[0].concept.clone();
    let q = ConceptQuery::new([concept.as_str()], 5).unwrap();
    let got = ok(&["query", "--index", s(&a), "--concepts", &concept, "--k", "5"]);
    assert_eq!(got, query_table(&ix, &q));
    assert!(got.lines().count() > 1);

    let got = ok(&["subtopics", "--index", s(&a), "--concepts", &concept, "--k", "5"]);
    assert_eq!(got, subtopic_table(&ix, &q));

    let json = ok(&["query", "--index", s(&a), "--concepts", &concept, "--k", "5", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v.is_object() || v.is_array());
}

#[test]
fn validate_graph_lists_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let (nodes, edges) = (tmp.path().join("n.tsv"), tmp.path().join("e.tsv"));
    std::fs::write(&nodes, "a\tinstance\nC\tconcept\n").unwrap();
    std::fs::write(&edges, "a\tC\tinstance\n").unwrap();
    let out = kgexplore(&["validate-graph", "--nodes", s(&nodes), "--edges", s(&edges)]);
    assert!(!out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(!stdout.trim().is_empty());
    assert!(String::from_utf8(out.stderr).unwrap().contains("error\tinvalid_graph\t"));

    synth(tmp.path());
    let out = kgexplore(&["validate-graph", "--graph", s(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn errors_are_one_tab_separated_line() {
    let out = kgexplore(&["query", "--index", "/nonexistent/ix.ncex", "--concepts", "C1"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().last().unwrap();
    assert!(line.starts_with("error\tio\t"), "{stderr}");
    assert_eq!(line.split('\t').count(), 3);
}

#[test]
fn corrupt_index_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let ix = tmp.path().join("ix.ncex");
    build(tmp.path(), &ix);
    let mut bytes = std::fs::read(&ix).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x20;
    std::fs::write(&ix, bytes).unwrap();
    let out = kgexplore(&["query", "--index", s(&ix), "--concepts", "C1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error\t"));
}
