//! Inverted index of ⟨concept, document, cdr⟩ entries and its file format.
//!
//! File layout (UTF-8, one record per line):
//!
//! ```text
//! NCEX<TAB>1
//! {header json: params, graph fingerprint, counts}
//! C<TAB>{concept json}        one per indexed concept, by id
//! E<TAB>{entry json}          grouped by concept, cdr desc, document asc
//! CRC32<TAB>xxxxxxxx          crc32 of every byte above this line
//! ```
//!
//! A zero-byte file is a valid empty index.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::graph::{ConceptId, KnowledgeGraph};
use crate::hop::{HopCache, HopOracle};
use crate::par;
use crate::scoring::{concept_specificity, rank_with_sources, ScoringParams};

pub const MAGIC: &str = "NCEX";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub theta: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub concept: String,
    pub document: String,
    pub cdr: f64,
    pub cdr_o: f64,
    pub cdr_c: f64,
    pub pivot_entity: String,
    pub matched_entities: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptInfo {
    pub concept: String,
    pub psi_size: usize,
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub params: ScoringParams,
    pub graph_fingerprint: String,
    pub instance_count: usize,
    pub concept_count: usize,
    pub entry_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildFailure {
    pub concept: String,
    pub document: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    header: IndexHeader,
    concepts: Vec<ConceptInfo>,
    entries: Vec<IndexEntry>,
    concept_pos: HashMap<String, usize>,
    concept_ranges: Vec<(usize, usize)>,
    // document -> entry positions, sorted by concept
    by_document: BTreeMap<String, Vec<usize>>,
    failures: Vec<BuildFailure>,
}

fn entry_order(a: &IndexEntry, b: &IndexEntry) -> Ordering {
    a.concept
        .cmp(&b.concept)
        .then_with(|| b.cdr.total_cmp(&a.cdr))
        .then_with(|| a.document.cmp(&b.document))
}

impl InvertedIndex {
    /// Assembles an index from unordered parts; entries are put into the
    /// canonical order.
    pub fn from_parts(
        params: ScoringParams,
        graph_fingerprint: String,
        instance_count: usize,
        mut concepts: Vec<ConceptInfo>,
        mut entries: Vec<IndexEntry>,
    ) -> Result<InvertedIndex> {
        concepts.sort_by(|a, b| a.concept.cmp(&b.concept));
        entries.sort_by(entry_order);
        let concept_pos: HashMap<String, usize> = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.concept.clone(), i))
            .collect();
        if concept_pos.len() != concepts.len() {
            return Err(Error::IndexFormat("duplicate concept record".into()));
        }
        let mut concept_ranges = vec![(0, 0); concepts.len()];
        let mut by_document: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut i = 0;
        while i < entries.len() {
            let c = &entries[i].concept;
            let pos = *concept_pos
                .get(c)
                .ok_or_else(|| Error::IndexFormat(format!("entry for undeclared concept `{c}`")))?;
            let start = i;
            while i < entries.len() && entries[i].concept == *c {
                by_document.entry(entries[i].document.clone()).or_default().push(i);
                i += 1;
            }
            concept_ranges[pos] = (start, i);
        }
        for list in by_document.values_mut() {
            list.sort_by(|&a, &b| entries[a].concept.cmp(&entries[b].concept));
            if list.windows(2).any(|w| entries[w[0]].concept == entries[w[1]].concept) {
                return Err(Error::IndexFormat("duplicate (concept, document) entry".into()));
            }
        }
        let header = IndexHeader {
            params,
            graph_fingerprint,
            instance_count,
            concept_count: concepts.len(),
            entry_count: entries.len(),
        };
        Ok(InvertedIndex {
            header,
            concepts,
            entries,
            concept_pos,
            concept_ranges,
            by_document,
            failures: Vec::new(),
        })
    }

    pub fn empty() -> InvertedIndex {
        Self::from_parts(ScoringParams::default(), String::new(), 0, Vec::new(), Vec::new())
            .expect("empty index is valid")
    }

    pub fn header(&self) -> &IndexHeader {
        &self.header
    }

    pub fn params(&self) -> &ScoringParams {
        &self.header.params
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// All entries, grouped by concept in id order.
    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn concepts(&self) -> &[ConceptInfo] {
        &self.concepts
    }

    pub fn concept_info(&self, concept: &str) -> Option<&ConceptInfo> {
        self.concept_pos.get(concept).map(|&i| &self.concepts[i])
    }

    /// Entries of `concept` ordered by cdr descending, then document id.
    pub fn entries_for_concept(&self, concept: &str) -> &[IndexEntry] {
        match self.concept_pos.get(concept) {
            Some(&i) => {
                let (lo, hi) = self.concept_ranges[i];
                &self.entries[lo..hi]
            }
            None => &[],
        }
    }

    /// Entries of `document`, ordered by concept id.
    pub fn entries_for_document(&self, document: &str) -> impl Iterator<Item = &IndexEntry> + '_ {
        self.by_document
            .get(document)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }

    pub fn entry(&self, concept: &str, document: &str) -> Option<&IndexEntry> {
        let list = self.by_document.get(document)?;
        list.binary_search_by(|&i| self.entries[i].concept.as_str().cmp(concept))
            .ok()
            .map(|j| &self.entries[list[j]])
    }

    pub fn documents(&self) -> impl Iterator<Item = &str> + '_ {
        self.by_document.keys().map(String::as_str)
    }

    pub fn document_count(&self) -> usize {
        self.by_document.len()
    }

    /// Entries that could not be scored during the build (not persisted).
    pub fn build_failures(&self) -> &[BuildFailure] {
        &self.failures
    }

    pub fn save<W: Write>(&self, mut sink: W) -> Result<()> {
        let bytes = self.to_bytes()?;
        sink.write_all(&bytes)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut body = Vec::new();
        writeln!(body, "{MAGIC}\t{FORMAT_VERSION}")?;
        serde_json::to_writer(&mut body, &self.header)?;
        body.push(b'\n');
        for c in &self.concepts {
            body.extend_from_slice(b"C\t");
            serde_json::to_writer(&mut body, c)?;
            body.push(b'\n');
        }
        for e in &self.entries {
            body.extend_from_slice(b"E\t");
            serde_json::to_writer(&mut body, e)?;
            body.push(b'\n');
        }
        let crc = crc32fast::hash(&body);
        writeln!(body, "CRC32\t{crc:08x}")?;
        Ok(body)
    }

    pub fn load<R: Read>(mut source: R) -> Result<InvertedIndex> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<InvertedIndex> {
        if bytes.is_empty() {
            return Ok(Self::empty());
        }
        if !bytes.ends_with(b"\n") {
            return Err(Error::Truncated("missing final newline".into()));
        }
        let without_nl = &bytes[..bytes.len() - 1];
        let trailer_start = without_nl.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        let trailer = std::str::from_utf8(&without_nl[trailer_start..])
            .map_err(|_| Error::Truncated("checksum trailer is not text".into()))?;
        let stored = trailer
            .strip_prefix("CRC32\t")
            .and_then(|h| u32::from_str_radix(h, 16).ok())
            .ok_or_else(|| Error::Truncated("missing checksum trailer".into()))?;
        let body = &bytes[..trailer_start];
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let text = std::str::from_utf8(body).map_err(|e| Error::IndexFormat(e.to_string()))?;
        let mut lines = text.lines();
        let magic = lines.next().unwrap_or_default();
        let version = match magic.split_once('\t') {
            Some((m, v)) if m == MAGIC => v
                .parse::<u32>()
                .map_err(|_| Error::IndexFormat(format!("bad version field `{v}`")))?,
            _ => return Err(Error::IndexFormat("bad magic".into())),
        };
        if version != FORMAT_VERSION {
            return Err(Error::IndexFormat(format!(
                "version mismatch: file has {version}, reader supports {FORMAT_VERSION}"
            )));
        }
        let header: IndexHeader = serde_json::from_str(
            lines.next().ok_or_else(|| Error::Truncated("missing header".into()))?,
        )?;
        let mut concepts = Vec::with_capacity(header.concept_count);
        let mut entries = Vec::with_capacity(header.entry_count);
        for line in lines {
            match line.split_once('\t') {
                Some(("C", json)) => concepts.push(serde_json::from_str(json)?),
                Some(("E", json)) => entries.push(serde_json::from_str(json)?),
                _ => return Err(Error::IndexFormat(format!("unexpected record `{line}`"))),
            }
        }
        if concepts.len() != header.concept_count || entries.len() != header.entry_count {
            return Err(Error::Truncated(format!(
                "header promises {} concepts / {} entries, found {} / {}",
                header.concept_count,
                header.entry_count,
                concepts.len(),
                entries.len()
            )));
        }
        Self::from_parts(
            header.params,
            header.graph_fingerprint,
            header.instance_count,
            concepts,
            entries,
        )
    }
}

/// Candidate concepts of a document: the concepts of each mentioned entity,
/// rolled up along `broader` to `depth`.
pub fn document_candidates(g: &KnowledgeGraph, d: &crate::corpus::Document, depth: usize) -> BTreeSet<ConceptId> {
    d.entities()
        .flat_map(|v| g.psi_inverse(v).iter().copied())
        .flat_map(|c0| g.broadened_concepts(c0, depth))
        .collect()
}

/// Scores every (candidate concept, document) pair of the corpus.
pub fn build_index(g: &KnowledgeGraph, corpus: &Corpus, params: &ScoringParams) -> Result<InvertedIndex> {
    let oracle = HopCache::new(params.conn.tau);
    build_index_with(g, corpus, params, &oracle)
}

pub fn build_index_with(
    g: &KnowledgeGraph,
    corpus: &Corpus,
    params: &ScoringParams,
    oracle: &dyn HopOracle,
) -> Result<InvertedIndex> {
    params.validate()?;
    let depth = params.broaden_depth;
    let mut jobs = Vec::new();
    let mut all_concepts = BTreeSet::new();
    for (di, d) in corpus.documents.iter().enumerate() {
        for c in document_candidates(g, d, depth) {
            all_concepts.insert(c);
            jobs.push((di, c));
        }
    }
    let concept_list: Vec<ConceptId> = all_concepts.into_iter().collect();
    let extended = par::map_slice(&concept_list, |&c| g.extended_instances(c, depth));
    let slot: HashMap<ConceptId, usize> = concept_list.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    let scored = par::map_slice(&jobs, |&(di, c)| {
        let d = &corpus.documents[di];
        rank_with_sources(g, &corpus.stats, oracle, c, d, params, &extended[slot[&c]])
            .map_err(|e| BuildFailure {
                concept: g.concept_name(c).to_owned(),
                document: d.id.clone(),
                reason: e.to_string(),
            })
    });
    let mut entries = Vec::with_capacity(scored.len());
    let mut failures = Vec::new();
    for r in scored {
        match r {
            Ok(e) => entries.push(e),
            Err(f) => {
                tracing::warn!(concept = %f.concept, document = %f.document, reason = %f.reason, "entry skipped");
                failures.push(f);
            }
        }
    }
    let concepts = concept_list
        .iter()
        .map(|&c| ConceptInfo {
            concept: g.concept_name(c).to_owned(),
            psi_size: g.psi(c).len(),
            specificity: concept_specificity(g, c, depth),
        })
        .collect();
    let mut ix = InvertedIndex::from_parts(*params, g.fingerprint(), g.instance_count(), concepts, entries)?;
    ix.failures = failures;
    Ok(ix)
}
