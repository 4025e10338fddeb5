//! Pre-linked documents and the corpus statistics behind term weighting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct MentionRecord {
    pub id: String,
    pub count: u32,
}

/// One line of the documents file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct DocumentRecord {
    pub id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    pub entities: Vec<MentionRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub body: Option<String>,
    /// (entity, mention count), sorted by entity, counts ≥ 1.
    pub mentions: Vec<(EntityId, u32)>,
}

impl Document {
    pub fn count(&self, v: EntityId) -> Option<u32> {
        self.mentions
            .binary_search_by_key(&v, |&(e, _)| e)
            .ok()
            .map(|i| self.mentions[i].1)
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.mentions.iter().map(|&(e, _)| e)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub doc_frequency: HashMap<EntityId, usize>,
}

impl CorpusStats {
    pub fn from_documents(docs: &[Document]) -> Self {
        let mut doc_frequency = HashMap::new();
        for d in docs {
            for v in d.entities() {
                *doc_frequency.entry(v).or_insert(0) += 1;
            }
        }
        CorpusStats { doc_count: docs.len(), doc_frequency }
    }

    pub fn df(&self, v: EntityId) -> usize {
        self.doc_frequency.get(&v).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    /// document id -> number of mentions dropped for unknown entities
    pub unknown_mentions: BTreeMap<String, usize>,
    /// documents dropped because no mention survived
    pub excluded_documents: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub stats: CorpusStats,
    pub report: IngestReport,
}

impl Corpus {
    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }
}

/// Reads JSON-lines document records and resolves mentions against `g`.
///
/// Unknown entity ids are dropped (counted per document); documents left
/// with no mentions are excluded. Repeated entity ids within a record are
/// summed.
pub fn ingest_documents<R: BufRead>(source: R, g: &KnowledgeGraph) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    let mut report = IngestReport::default();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            source_name: "documents",
            line: i + 1,
            reason: e.to_string(),
        })?;
        if rec.id.is_empty() {
            return Err(Error::Malformed {
                source_name: "documents",
                line: i + 1,
                reason: "empty document id".into(),
            });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateDocument(rec.id));
        }
        let mut mentions: BTreeMap<EntityId, u32> = BTreeMap::new();
        let mut unknown = 0;
        for m in &rec.entities {
            if m.count == 0 {
                return Err(Error::Malformed {
                    source_name: "documents",
                    line: i + 1,
                    reason: format!("mention `{}` has count 0", m.id),
                });
            }
            match g.entity(&m.id) {
                Some(v) => *mentions.entry(v).or_insert(0) += m.count,
                None => unknown += 1,
            }
        }
        if unknown > 0 {
            tracing::warn!(document = %rec.id, unknown, "dropped mentions of unknown entities");
            report.unknown_mentions.insert(rec.id.clone(), unknown);
        }
        if mentions.is_empty() {
            report.excluded_documents.push(rec.id);
            continue;
        }
        documents.push(Document {
            id: rec.id,
            title: rec.title,
            body: rec.body,
            mentions: mentions.into_iter().collect(),
        });
    }
    let stats = CorpusStats::from_documents(&documents);
    Ok(Corpus { documents, stats, report })
}

/// TF-IDF weight `count(v, d) · ln(N / df(v))`.
pub fn term_weight(stats: &CorpusStats, v: EntityId, d: &Document) -> Result<f64> {
    let count = d
        .count(v)
        .ok_or_else(|| Error::InvalidParams(format!("entity {} not mentioned in {}", v.0, d.id)))?;
    let df = stats.df(v).max(1);
    Ok(count as f64 * (stats.doc_count as f64 / df as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_graph;

    fn g() -> KnowledgeGraph {
        load_graph("a\tinstance\nb\tinstance\n".as_bytes(), "".as_bytes()).unwrap()
    }

    #[test]
    fn unknown_mentions_are_dropped() {
        let g = g();
        let src = r#"{"id":"d1","title":"t","entities":[{"id":"a","count":2},{"id":"zz","count":1}]}
{"id":"d2","title":"t","entities":[{"id":"zz","count":1}]}
{"id":"d3","title":"t","entities":[{"id":"a","count":1},{"id":"b","count":1}]}"#;
        let c = ingest_documents(src.as_bytes(), &g).unwrap();
        assert_eq!(c.documents.len(), 2);
        let a = g.entity("a").unwrap();
        assert_eq!(c.documents[0].mentions, vec![(a, 2)]);
        assert_eq!(c.report.unknown_mentions["d1"], 1);
        assert_eq!(c.report.excluded_documents, vec!["d2".to_string()]);
        assert_eq!(c.stats.doc_count, 2);
        assert_eq!(c.stats.df(a), 2);
    }

    #[test]
    fn duplicate_and_malformed() {
        let g = g();
        let dup = "{\"id\":\"d\",\"title\":\"\",\"entities\":[{\"id\":\"a\",\"count\":1}]}\n".repeat(2);
        assert!(matches!(ingest_documents(dup.as_bytes(), &g), Err(Error::DuplicateDocument(_))));
        assert!(matches!(
            ingest_documents("{not json".as_bytes(), &g),
            Err(Error::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn tf_idf_arithmetic() {
        let a = EntityId(0);
        let stats = CorpusStats {
            doc_count: 4,
            doc_frequency: HashMap::from([(a, 2)]),
        };
        let d = Document { id: "d".into(), title: String::new(), body: None, mentions: vec![(a, 2)] };
        let tw = term_weight(&stats, a, &d).unwrap();
        assert!((tw - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((tw - 1.3863).abs() < 1e-4);

        let everywhere = CorpusStats { doc_count: 4, doc_frequency: HashMap::from([(a, 4)]) };
        assert_eq!(term_weight(&everywhere, a, &d).unwrap(), 0.0);
        assert!(term_weight(&stats, EntityId(9), &d).is_err());
    }
}
