//! Concept-document rank: ontology relevance (specificity × pivot term
//! weight) times context relevance (normalized connectivity).

use serde::{Deserialize, Serialize};

use crate::corpus::{term_weight, CorpusStats, Document};
use crate::error::{Error, Result};
use crate::estimator::{estimate_conn_between, SampleSpec};
use crate::graph::{ConceptId, EntityId, KnowledgeGraph};
use crate::hop::HopOracle;
use crate::index::{EstimateMeta, IndexEntry};
use crate::paths::{exact_conn_between, ConnParams};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringParams {
    pub conn: ConnParams,
    /// Walks per sampled connectivity estimate.
    pub theta: usize,
    /// Roll-up depth along `broader` used for candidate concepts and matching.
    pub broaden_depth: usize,
    pub use_exact_conn: bool,
    /// Context relevance assigned when every mention of the document matches the concept.
    pub empty_context_cdr_c: f64,
    pub seed: u64,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams {
            conn: ConnParams::default(),
            theta: 50,
            broaden_depth: 2,
            use_exact_conn: false,
            empty_context_cdr_c: 1.0,
            seed: 0,
        }
    }
}

impl ScoringParams {
    pub fn validate(&self) -> Result<()> {
        self.conn.validate()?;
        if self.theta == 0 {
            return Err(Error::InvalidParams("theta must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.empty_context_cdr_c) {
            return Err(Error::InvalidParams(format!(
                "empty_context_cdr_c must be in [0, 1], got {}",
                self.empty_context_cdr_c
            )));
        }
        Ok(())
    }
}

/// `ln(|V_I| / n)` for a concept covering `n` instances.
pub fn specificity_factor(instance_count: usize, n: usize) -> f64 {
    (instance_count as f64 / n as f64).ln()
}

/// Specificity of `c`: uses |Ψ(c)|, or |Ψ*(c)| at `depth` for concepts
/// without direct instances. Zero when neither has members.
pub fn concept_specificity(g: &KnowledgeGraph, c: ConceptId, depth: usize) -> f64 {
    let n = match g.psi(c).len() {
        0 => g.extended_instances(c, depth).len(),
        n => n,
    };
    if n == 0 {
        0.0
    } else {
        specificity_factor(g.instance_count(), n)
    }
}

/// Splits the document's entities into those matching `c` (directly or via a
/// descendant within `depth`) and the remaining context entities.
pub fn matched_context_split(
    g: &KnowledgeGraph,
    c: ConceptId,
    d: &Document,
    depth: usize,
) -> (Vec<EntityId>, Vec<EntityId>) {
    let extended = g.extended_instances(c, depth);
    split_by(&extended, d)
}

fn split_by(sorted_members: &[EntityId], d: &Document) -> (Vec<EntityId>, Vec<EntityId>) {
    d.entities()
        .partition(|v| sorted_members.binary_search(v).is_ok())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OntologyScore {
    pub value: f64,
    pub pivot: EntityId,
    /// Concept whose instances supplied the pivot: `c` itself, or the
    /// descendant standing in for a broad concept.
    pub via: ConceptId,
}

fn direct_score(g: &KnowledgeGraph, stats: &CorpusStats, c: ConceptId, d: &Document) -> Option<OntologyScore> {
    let psi = g.psi(c);
    let mut best: Option<(EntityId, f64)> = None;
    for v in d.entities() {
        if psi.binary_search(&v).is_ok() {
            let tw = term_weight(stats, v, d).expect("v is mentioned in d");
            if best.is_none_or(|(_, b)| tw > b) {
                best = Some((v, tw));
            }
        }
    }
    best.map(|(pivot, tw)| OntologyScore {
        value: specificity_factor(g.instance_count(), psi.len()) * tw,
        pivot,
        via: c,
    })
}

/// Ontology relevance of `c` to `d`. A concept with no direct match takes the
/// best score among its descendants (within `depth`) that match directly.
pub fn ontology_relevance(
    g: &KnowledgeGraph,
    stats: &CorpusStats,
    c: ConceptId,
    d: &Document,
    depth: usize,
) -> Result<OntologyScore> {
    if let Some(s) = direct_score(g, stats, c, d) {
        return Ok(s);
    }
    let mut best: Option<OntologyScore> = None;
    for child in g.narrower_descendants(c, depth) {
        if child == c {
            continue;
        }
        if let Some(s) = direct_score(g, stats, child, d) {
            if best.is_none_or(|b| s.value > b.value) {
                best = Some(s);
            }
        }
    }
    best.ok_or_else(|| Error::UnmatchableConcept(g.concept_name(c).to_owned()))
}

/// Maps a connectivity score onto [0, 1): `conn / (1 + conn)`.
pub fn context_relevance(conn: f64) -> Result<f64> {
    if conn.is_nan() || conn < 0.0 {
        return Err(Error::InvalidParams(format!("connectivity must be >= 0, got {conn}")));
    }
    if conn.is_infinite() {
        return Ok(1.0 - f64::EPSILON);
    }
    // keeps the value strictly below 1 once 1 + conn rounds to conn
    Ok((conn / (1.0 + conn)).min(1.0 - f64::EPSILON))
}

/// Connectivity of `sources` to `context`, exact or sampled per `params`,
/// together with the sampling metadata when it was estimated.
pub fn connectivity(
    g: &KnowledgeGraph,
    oracle: &dyn HopOracle,
    sources: &[EntityId],
    context: &[EntityId],
    params: &ScoringParams,
    seed: u64,
) -> Result<(f64, Option<EstimateMeta>)> {
    if params.use_exact_conn {
        match exact_conn_between(g, sources, context, &params.conn) {
            Ok(v) => return Ok((v, None)),
            Err(Error::EnumerationCap { .. }) => {
                tracing::debug!("exact connectivity over cap, falling back to sampling");
            }
            Err(e) => return Err(e),
        }
    }
    let est = estimate_conn_between(g, oracle, sources, context, &params.conn, SampleSpec::pruned(params.theta, seed))?;
    Ok((est.mean, Some(EstimateMeta { theta: params.theta, seed })))
}

/// Seed of the connectivity estimate for entry (concept, document).
pub fn entry_seed(base: u64, concept: &str, document: &str) -> u64 {
    derive_seed(base, &[concept.as_bytes(), document.as_bytes()])
}

/// Full index entry for (c, d).
pub fn concept_document_rank(
    g: &KnowledgeGraph,
    stats: &CorpusStats,
    oracle: &dyn HopOracle,
    c: ConceptId,
    d: &Document,
    params: &ScoringParams,
) -> Result<IndexEntry> {
    let sources = g.extended_instances(c, params.broaden_depth);
    rank_with_sources(g, stats, oracle, c, d, params, &sources)
}

/// As [`concept_document_rank`] with Ψ*(c) supplied by the caller.
pub(crate) fn rank_with_sources(
    g: &KnowledgeGraph,
    stats: &CorpusStats,
    oracle: &dyn HopOracle,
    c: ConceptId,
    d: &Document,
    params: &ScoringParams,
    sources: &[EntityId],
) -> Result<IndexEntry> {
    let (matched, context) = split_by(sources, d);
    if matched.is_empty() {
        return Err(Error::UnmatchableConcept(g.concept_name(c).to_owned()));
    }
    let onto = ontology_relevance(g, stats, c, d, params.broaden_depth)?;
    let concept = g.concept_name(c);
    let (cdr_c, estimate) = if context.is_empty() {
        (params.empty_context_cdr_c, None)
    } else {
        let seed = entry_seed(params.seed, concept, &d.id);
        let (conn, meta) = connectivity(g, oracle, sources, &context, params, seed)?;
        (context_relevance(conn)?, meta)
    };
    Ok(IndexEntry {
        concept: concept.to_owned(),
        document: d.id.clone(),
        cdr: onto.value * cdr_c,
        cdr_o: onto.value,
        cdr_c,
        pivot_entity: g.entity_name(onto.pivot).to_owned(),
        matched_entities: matched.iter().map(|&v| g.entity_name(v).to_owned()).collect(),
        estimate,
    })
}
