use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::Args;
use kgexplore::corpus::{ingest_documents, Corpus};
use kgexplore::graph::validate_graph;
use kgexplore::index::InvertedIndex;
use kgexplore::synth::{EDGES_FILE, NODES_FILE};
use kgexplore::{load_graph, KnowledgeGraph};

use crate::error::{CliError, CliResult};

/// Graph location: a directory holding `nodes.tsv` and `edges.tsv`, or the two files.
#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Directory containing nodes.tsv and edges.tsv
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Node declarations file (overrides --graph)
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Edge records file (overrides --graph)
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

impl GraphArgs {
    pub fn paths(&self) -> CliResult<(PathBuf, PathBuf)> {
        let pick = |explicit: &Option<PathBuf>, name: &str| match (explicit, &self.graph) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(dir)) => Ok(dir.join(name)),
            (None, None) => Err(CliError::usage(format!("missing --graph or --{}", name.trim_end_matches(".tsv")))),
        };
        Ok((pick(&self.nodes, NODES_FILE)?, pick(&self.edges, EDGES_FILE)?))
    }

    pub fn load(&self) -> CliResult<KnowledgeGraph> {
        let (nodes, edges) = self.paths()?;
        let g = load_graph(reader(&nodes)?, reader(&edges)?)?;
        let report = g.load_report();
        tracing::info!(
            instances = g.instance_count(),
            concepts = g.concept_count(),
            self_loops_dropped = report.self_loops_dropped,
            parallel_edges_collapsed = report.parallel_edges_collapsed,
            "graph loaded"
        );
        Ok(g)
    }

    pub fn validate(&self) -> CliResult<Vec<kgexplore::Error>> {
        let (nodes, edges) = self.paths()?;
        Ok(validate_graph(reader(&nodes)?, reader(&edges)?)?)
    }
}

pub fn reader(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

pub fn load_corpus(path: &Path, g: &KnowledgeGraph) -> CliResult<Corpus> {
    let corpus = ingest_documents(reader(path)?, g)?;
    let unknown: usize = corpus.report.unknown_mentions.values().sum();
    if unknown > 0 {
        tracing::warn!(unknown_mentions = unknown, documents = corpus.report.unknown_mentions.len(), excluded = corpus.report.excluded_documents.len(), "mentions of entities absent from the graph were dropped");
    }
    tracing::info!(documents = corpus.documents.len(), "corpus loaded");
    Ok(corpus)
}

pub fn load_index(path: &Path) -> CliResult<InvertedIndex> {
    let ix = InvertedIndex::load(reader(path)?)
        .map_err(|e| CliError::new(e.kind(), format!("{}: {e}", path.display())))?;
    tracing::info!(entries = ix.len(), concepts = ix.concepts().len(), "index loaded");
    Ok(ix)
}

/// Comma separated list, blanks dropped.
pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::to_owned).collect()
}
