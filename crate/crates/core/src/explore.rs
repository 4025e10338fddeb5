//! Roll-up retrieval and drill-down subtopic ranking over a built index.
//!
//! Index scores are authoritative here; nothing is re-scored at query time.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{ConceptId, KnowledgeGraph};
use crate::index::InvertedIndex;
use crate::scoring::concept_specificity;

pub const DEFAULT_K: usize = 10;

/// A concept pattern query: distinct concept ids plus a result budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptQuery {
    concepts: Vec<String>,
    k: usize,
}

impl ConceptQuery {
    pub fn new<I, S>(concepts: I, k: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let concepts: Vec<String> = concepts.into_iter().map(Into::into).collect();
        if concepts.is_empty() {
            return Err(Error::InvalidParams("query needs at least one concept".into()));
        }
        if k == 0 {
            return Err(Error::InvalidParams("k must be >= 1".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = concepts.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::InvalidParams(format!("concept `{dup}` repeated in query")));
        }
        Ok(ConceptQuery { concepts, k })
    }

    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.concepts.iter().any(|c| c == concept)
    }

    /// Q ∪ {concept}, same k.
    pub fn augmented(&self, concept: &str) -> Result<Self> {
        let mut concepts = self.concepts.clone();
        concepts.push(concept.to_owned());
        ConceptQuery::new(concepts, self.k)
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        ConceptQuery::new(self.concepts.clone(), k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConceptEvidence {
    pub concept: String,
    pub cdr: f64,
    pub cdr_o: f64,
    pub cdr_c: f64,
    pub pivot_entity: String,
    pub matched_entities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedDocument {
    pub document: String,
    pub rel: f64,
    /// One item per query concept, in query order.
    pub per_concept: Vec<ConceptEvidence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubtopicComponents {
    pub coverage: f64,
    pub specificity: f64,
    pub diversity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubtopicSuggestion {
    pub concept: String,
    pub sbr: f64,
    pub coverage: f64,
    pub specificity: f64,
    pub diversity: f64,
    pub support_docs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct MatchSet {
    /// Sorted document ids.
    pub documents: Vec<String>,
    /// Query concepts with no entries in the index.
    pub unknown_concepts: Vec<String>,
}

/// Documents having an index entry for every query concept. Unknown concepts
/// produce an empty match and are listed, not rejected.
pub fn match_documents(ix: &InvertedIndex, q: &ConceptQuery) -> MatchSet {
    let unknown_concepts: Vec<String> = q
        .concepts()
        .iter()
        .filter(|c| ix.concept_info(c).is_none())
        .cloned()
        .collect();
    if !unknown_concepts.is_empty() {
        tracing::warn!(?unknown_concepts, "query references concepts absent from the index");
        return MatchSet { documents: Vec::new(), unknown_concepts };
    }
    // Start from the rarest concept and probe the rest.
    let rarest = q
        .concepts()
        .iter()
        .min_by_key(|c| ix.entries_for_concept(c).len())
        .expect("query is non-empty");
    let mut documents: Vec<String> = ix
        .entries_for_concept(rarest)
        .iter()
        .filter(|e| q.concepts().iter().all(|c| ix.entry(c, &e.document).is_some()))
        .map(|e| e.document.clone())
        .collect();
    documents.sort();
    MatchSet { documents, unknown_concepts }
}

fn ranked(ix: &InvertedIndex, q: &ConceptQuery, document: &str) -> RankedDocument {
    let per_concept: Vec<ConceptEvidence> = q
        .concepts()
        .iter()
        .map(|c| {
            let e = ix.entry(c, document).expect("matched document has an entry per concept");
            ConceptEvidence {
                concept: c.clone(),
                cdr: e.cdr,
                cdr_o: e.cdr_o,
                cdr_c: e.cdr_c,
                pivot_entity: e.pivot_entity.clone(),
                matched_entities: e.matched_entities.clone(),
            }
        })
        .collect();
    RankedDocument {
        document: document.to_owned(),
        rel: per_concept.iter().map(|p| p.cdr).sum(),
        per_concept,
    }
}

/// All matched documents ranked by rel descending, ties by document id.
pub fn rank_all(ix: &InvertedIndex, q: &ConceptQuery) -> Vec<RankedDocument> {
    let mut out: Vec<RankedDocument> = match_documents(ix, q)
        .documents
        .iter()
        .map(|d| ranked(ix, q, d))
        .collect();
    out.sort_by(|a, b| b.rel.total_cmp(&a.rel).then_with(|| a.document.cmp(&b.document)));
    out
}

/// Top-k documents for the query.
pub fn rollup_query(ix: &InvertedIndex, q: &ConceptQuery) -> Vec<RankedDocument> {
    let mut out = rank_all(ix, q);
    out.truncate(q.k());
    out
}

/// Concept menu for an entity: its concepts rolled up to `depth`, most
/// specific first, ties by concept id.
pub fn rollup_candidates(g: &KnowledgeGraph, entity: &str, depth: usize) -> Result<Vec<ConceptId>> {
    let v = g
        .entity(entity)
        .ok_or_else(|| Error::UnknownEntity(entity.to_owned()))?;
    let set: BTreeSet<ConceptId> = g
        .psi_inverse(v)
        .iter()
        .flat_map(|&c| g.broadened_concepts(c, depth))
        .collect();
    let mut menu: Vec<(f64, ConceptId)> = set
        .into_iter()
        .map(|c| (concept_specificity(g, c, depth), c))
        .collect();
    menu.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| g.concept_name(a.1).cmp(g.concept_name(b.1)))
    });
    Ok(menu.into_iter().map(|(_, c)| c).collect())
}

/// Concepts with an entry in some matched document, excluding Q itself.
pub fn candidate_subtopics(ix: &InvertedIndex, q: &ConceptQuery) -> BTreeSet<String> {
    let matched = match_documents(ix, q);
    candidates_of(ix, q, &matched.documents)
}

fn candidates_of(ix: &InvertedIndex, q: &ConceptQuery, matched: &[String]) -> BTreeSet<String> {
    matched
        .iter()
        .flat_map(|d| ix.entries_for_document(d))
        .filter(|e| !q.contains(&e.concept))
        .map(|e| e.concept.clone())
        .collect()
}

fn components_over(
    ix: &InvertedIndex,
    concept: &str,
    matched: &[String],
) -> (SubtopicComponents, usize) {
    let mut coverage = 0.0;
    let mut distinct: BTreeSet<&str> = BTreeSet::new();
    let mut support = 0;
    for d in matched {
        if let Some(e) = ix.entry(concept, d) {
            coverage += e.cdr;
            distinct.extend(e.matched_entities.iter().map(String::as_str));
            support += 1;
        }
    }
    let specificity = ix.concept_info(concept).map_or(0.0, |i| i.specificity);
    let diversity = if support == 0 { 0.0 } else { distinct.len() as f64 / support as f64 };
    (SubtopicComponents { coverage, specificity, diversity }, support)
}

/// Coverage, specificity and diversity of candidate `concept` for `q`.
pub fn subtopic_components(ix: &InvertedIndex, concept: &str, q: &ConceptQuery) -> Result<SubtopicComponents> {
    let matched = match_documents(ix, q).documents;
    if q.contains(concept) || !matched.iter().any(|d| ix.entry(concept, d).is_some()) {
        return Err(Error::NotACandidate(concept.to_owned()));
    }
    Ok(components_over(ix, concept, &matched).0)
}

/// Top-k subtopics by sbr = coverage · specificity · diversity, ties by concept id.
pub fn subtopic_rank(ix: &InvertedIndex, q: &ConceptQuery) -> Vec<SubtopicSuggestion> {
    let matched = match_documents(ix, q).documents;
    let mut out: Vec<SubtopicSuggestion> = candidates_of(ix, q, &matched)
        .into_iter()
        .map(|c| {
            let (comp, support) = components_over(ix, &c, &matched);
            SubtopicSuggestion {
                sbr: comp.coverage * comp.specificity * comp.diversity,
                coverage: comp.coverage,
                specificity: comp.specificity,
                diversity: comp.diversity,
                support_docs: support,
                concept: c,
            }
        })
        .collect();
    out.sort_by(|a, b| b.sbr.total_cmp(&a.sbr).then_with(|| a.concept.cmp(&b.concept)));
    out.truncate(q.k());
    out
}

/// Roll-up of Q ∪ {subtopic}.
pub fn drilldown(ix: &InvertedIndex, q: &ConceptQuery, subtopic: &str) -> Result<Vec<RankedDocument>> {
    let augmented = q.augmented(subtopic)?;
    Ok(rollup_query(ix, &augmented))
}
