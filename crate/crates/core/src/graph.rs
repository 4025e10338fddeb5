//! Two-space knowledge graph: instance entities connected by undirected
//! instance edges, concept entities connected by `broader` edges, and the
//! ontology relation mapping each concept to the instances it categorizes.
//!
//! All identifiers are interned on load. Traversals and scoring run on the
//! dense [`EntityId`] / [`ConceptId`] handles; names are only needed at the
//! boundaries (files, index, service).

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::BufRead;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense handle of an instance entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

/// Dense handle of a concept entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ConceptId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Default)]
struct Interner {
    names: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&h) = self.lookup.get(name) {
            return h;
        }
        let h = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.lookup.insert(name.to_owned(), h);
        h
    }

    fn get(&self, name: &str) -> Option<u32> {
        self.lookup.get(name).copied()
    }

    fn len(&self) -> usize {
        self.names.len()
    }
}

/// Node space of a declared identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Instance,
    Concept,
}

impl Space {
    fn parse(s: &str) -> Option<Space> {
        match s {
            "instance" => Some(Space::Instance),
            "concept" => Some(Space::Concept),
            _ => None,
        }
    }
}

/// Kind column of the edges file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Instance,
    Broader,
    Ontology,
}

impl EdgeKind {
    fn parse(s: &str) -> Option<EdgeKind> {
        match s {
            "instance" => Some(EdgeKind::Instance),
            "broader" => Some(EdgeKind::Broader),
            "ontology" => Some(EdgeKind::Ontology),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Instance => "instance",
            EdgeKind::Broader => "broader",
            EdgeKind::Ontology => "ontology",
        }
    }
}

/// Counters for records that were accepted but normalized away during load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub parallel_edges_collapsed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub instance_count: usize,
    pub concept_count: usize,
    /// Undirected, deduplicated instance edges.
    pub instance_edges: usize,
    /// Distinct narrower -> broader pairs.
    pub broader_edges: usize,
    pub ontology_pairs: usize,
    /// instance degree -> number of instances with that degree
    pub degree_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Interner,
    concepts: Interner,
    instance_adj: Vec<Vec<EntityId>>,
    broader: Vec<Vec<ConceptId>>,
    narrower: Vec<Vec<ConceptId>>,
    psi: Vec<Vec<EntityId>>,
    psi_inv: Vec<Vec<ConceptId>>,
    report: LoadReport,
}

impl KnowledgeGraph {
    pub fn instance_count(&self) -> usize {
        self.entities.len()
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }

    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn concept(&self, name: &str) -> Option<ConceptId> {
        self.concepts.get(name).map(ConceptId)
    }

    pub fn entity_name(&self, v: EntityId) -> &str {
        &self.entities.names[v.index()]
    }

    pub fn concept_name(&self, c: ConceptId) -> &str {
        &self.concepts.names[c.index()]
    }

    pub fn entities(&self) -> impl ExactSizeIterator<Item = EntityId> + '_ {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn concepts(&self) -> impl ExactSizeIterator<Item = ConceptId> + '_ {
        (0..self.concepts.len() as u32).map(ConceptId)
    }

    /// Sorted, distinct instance neighbors.
    #[inline]
    pub fn neighbors(&self, v: EntityId) -> &[EntityId] {
        &self.instance_adj[v.index()]
    }

    #[inline]
    pub fn are_adjacent(&self, a: EntityId, b: EntityId) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn broader_of(&self, c: ConceptId) -> &[ConceptId] {
        &self.broader[c.index()]
    }

    pub fn narrower_of(&self, c: ConceptId) -> &[ConceptId] {
        &self.narrower[c.index()]
    }

    /// Ψ(c), sorted by handle.
    #[inline]
    pub fn psi(&self, c: ConceptId) -> &[EntityId] {
        &self.psi[c.index()]
    }

    /// Ψ⁻¹(v), sorted by handle.
    #[inline]
    pub fn psi_inverse(&self, v: EntityId) -> &[ConceptId] {
        &self.psi_inv[v.index()]
    }

    pub fn instances_of(&self, concept: &str) -> Result<&[EntityId]> {
        let c = self
            .concept(concept)
            .ok_or_else(|| Error::UnknownConcept(concept.to_owned()))?;
        Ok(self.psi(c))
    }

    pub fn concepts_of(&self, entity: &str) -> Result<&[ConceptId]> {
        let v = self
            .entity(entity)
            .ok_or_else(|| Error::UnknownEntity(entity.to_owned()))?;
        Ok(self.psi_inverse(v))
    }

    /// `c` plus every ancestor within `depth` broader edges, sorted by handle.
    pub fn broadened_concepts(&self, c: ConceptId, depth: usize) -> Vec<ConceptId> {
        self.concept_bfs(c, depth, &self.broader)
    }

    /// `c` plus every descendant within `depth` narrower edges, sorted by handle.
    pub fn narrower_descendants(&self, c: ConceptId, depth: usize) -> Vec<ConceptId> {
        self.concept_bfs(c, depth, &self.narrower)
    }

    fn concept_bfs(&self, c: ConceptId, depth: usize, adj: &[Vec<ConceptId>]) -> Vec<ConceptId> {
        let mut seen = vec![false; self.concepts.len()];
        let mut out = vec![c];
        seen[c.index()] = true;
        let mut queue = VecDeque::from([(c, 0usize)]);
        while let Some((x, d)) = queue.pop_front() {
            if d == depth {
                continue;
            }
            for &y in &adj[x.index()] {
                if !seen[y.index()] {
                    seen[y.index()] = true;
                    out.push(y);
                    queue.push_back((y, d + 1));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Union of Ψ over `narrower_descendants(c, depth)`, sorted and distinct.
    pub fn extended_instances(&self, c: ConceptId, depth: usize) -> Vec<EntityId> {
        let mut out: Vec<EntityId> = self
            .narrower_descendants(c, depth)
            .into_iter()
            .flat_map(|x| self.psi(x).iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn stats(&self) -> GraphStats {
        let mut degree_histogram = BTreeMap::new();
        let mut degree_sum = 0;
        for adj in &self.instance_adj {
            degree_sum += adj.len();
            *degree_histogram.entry(adj.len()).or_insert(0) += 1;
        }
        GraphStats {
            instance_count: self.instance_count(),
            concept_count: self.concept_count(),
            instance_edges: degree_sum / 2,
            broader_edges: self.broader.iter().map(Vec::len).sum(),
            ontology_pairs: self.psi.iter().map(Vec::len).sum(),
            degree_histogram,
        }
    }

    pub fn load_report(&self) -> LoadReport {
        self.report
    }

    /// Content hash over names, adjacency, hierarchy and ontology, as hex.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.entities.names {
            h.update(b"I");
            h.update(name.as_bytes());
            h.update([0]);
        }
        for name in &self.concepts.names {
            h.update(b"C");
            h.update(name.as_bytes());
            h.update([0]);
        }
        for (i, adj) in self.instance_adj.iter().enumerate() {
            h.update(b"E");
            h.update((i as u32).to_le_bytes());
            for n in adj {
                h.update(n.0.to_le_bytes());
            }
        }
        for (i, adj) in self.broader.iter().enumerate() {
            h.update(b"B");
            h.update((i as u32).to_le_bytes());
            for n in adj {
                h.update(n.0.to_le_bytes());
            }
        }
        for (i, members) in self.psi.iter().enumerate() {
            h.update(b"P");
            h.update((i as u32).to_le_bytes());
            for n in members {
                h.update(n.0.to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..16])
    }

    /// Checks the structural invariants; returns a description of the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for v in self.entities() {
            let adj = self.neighbors(v);
            if adj.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("adjacency of {} not sorted/distinct", self.entity_name(v)));
            }
            for &n in adj {
                if n == v {
                    return Err(format!("self-loop at {}", self.entity_name(v)));
                }
                if !self.are_adjacent(n, v) {
                    return Err(format!(
                        "asymmetric edge {} -> {}",
                        self.entity_name(v),
                        self.entity_name(n)
                    ));
                }
            }
            for &c in self.psi_inverse(v) {
                if self.psi(c).binary_search(&v).is_err() {
                    return Err(format!("psi inverse mismatch at {}", self.entity_name(v)));
                }
            }
        }
        for c in self.concepts() {
            for &p in self.broader_of(c) {
                if !self.narrower_of(p).contains(&c) {
                    return Err(format!("broader/narrower mismatch at {}", self.concept_name(c)));
                }
            }
            for &v in self.psi(c) {
                if self.psi_inverse(v).binary_search(&c).is_err() {
                    return Err(format!("psi mismatch at {}", self.concept_name(c)));
                }
            }
        }
        Ok(())
    }
}

/// Incremental construction of a [`KnowledgeGraph`] by name.
///
/// Used by the file loader and the synthetic generator; edges are validated
/// against the space partition as they are added.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entities: Interner,
    concepts: Interner,
    instance_edges: Vec<(u32, u32)>,
    broader_edges: Vec<(u32, u32)>,
    ontology: Vec<(u32, u32)>,
    report: LoadReport,
}

#[derive(Debug)]
enum BuildError {
    Conflict(String),
    Undeclared(String),
    Partition { detail: String },
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn declare(&mut self, id: &str, space: Space) -> std::result::Result<(), BuildError> {
        match space {
            Space::Instance => {
                if self.concepts.get(id).is_some() {
                    return Err(BuildError::Conflict(id.to_owned()));
                }
                self.entities.intern(id);
            }
            Space::Concept => {
                if self.entities.get(id).is_some() {
                    return Err(BuildError::Conflict(id.to_owned()));
                }
                self.concepts.intern(id);
            }
        }
        Ok(())
    }

    pub fn add_instance(&mut self, id: &str) -> Result<EntityId> {
        self.declare(id, Space::Instance)
            .map_err(|_| Error::ConflictingSpace { line: 0, id: id.to_owned() })?;
        Ok(EntityId(self.entities.get(id).expect("just interned")))
    }

    pub fn add_concept(&mut self, id: &str) -> Result<ConceptId> {
        self.declare(id, Space::Concept)
            .map_err(|_| Error::ConflictingSpace { line: 0, id: id.to_owned() })?;
        Ok(ConceptId(self.concepts.get(id).expect("just interned")))
    }

    fn space_of(&self, id: &str) -> Option<Space> {
        if self.entities.get(id).is_some() {
            Some(Space::Instance)
        } else if self.concepts.get(id).is_some() {
            Some(Space::Concept)
        } else {
            None
        }
    }

    fn add_edge_inner(
        &mut self,
        src: &str,
        dst: &str,
        kind: EdgeKind,
    ) -> std::result::Result<(), BuildError> {
        let s = self
            .space_of(src)
            .ok_or_else(|| BuildError::Undeclared(src.to_owned()))?;
        let d = self
            .space_of(dst)
            .ok_or_else(|| BuildError::Undeclared(dst.to_owned()))?;
        let (want_s, want_d) = match kind {
            EdgeKind::Instance => (Space::Instance, Space::Instance),
            EdgeKind::Broader => (Space::Concept, Space::Concept),
            EdgeKind::Ontology => (Space::Instance, Space::Concept),
        };
        if s != want_s || d != want_d {
            return Err(BuildError::Partition {
                detail: format!("expected {want_s:?} -> {want_d:?}, got {s:?} -> {d:?}"),
            });
        }
        match kind {
            EdgeKind::Instance => {
                let (a, b) = (self.entities.get(src).unwrap(), self.entities.get(dst).unwrap());
                if a == b {
                    self.report.self_loops_dropped += 1;
                } else {
                    self.instance_edges.push((a.min(b), a.max(b)));
                }
            }
            EdgeKind::Broader => {
                let (a, b) = (self.concepts.get(src).unwrap(), self.concepts.get(dst).unwrap());
                if a == b {
                    self.report.self_loops_dropped += 1;
                } else {
                    self.broader_edges.push((a, b));
                }
            }
            EdgeKind::Ontology => {
                let v = self.entities.get(src).unwrap();
                let c = self.concepts.get(dst).unwrap();
                self.ontology.push((c, v));
            }
        }
        Ok(())
    }

    pub fn add_instance_edge(&mut self, a: &str, b: &str) -> Result<()> {
        self.add_edge(a, b, EdgeKind::Instance)
    }

    /// `narrower` is a child of `broader`.
    pub fn add_broader(&mut self, narrower: &str, broader: &str) -> Result<()> {
        self.add_edge(narrower, broader, EdgeKind::Broader)
    }

    /// Installs `instance ∈ Ψ(concept)`.
    pub fn add_ontology(&mut self, instance: &str, concept: &str) -> Result<()> {
        self.add_edge(instance, concept, EdgeKind::Ontology)
    }

    pub fn add_edge(&mut self, src: &str, dst: &str, kind: EdgeKind) -> Result<()> {
        self.add_edge_inner(src, dst, kind)
            .map_err(|e| edge_error(e, 0, src, dst, kind))
    }

    pub fn build(self) -> KnowledgeGraph {
        let ni = self.entities.len();
        let nc = self.concepts.len();
        let mut report = self.report;

        let mut instance_edges = self.instance_edges;
        instance_edges.sort_unstable();
        let before = instance_edges.len();
        instance_edges.dedup();
        report.parallel_edges_collapsed += before - instance_edges.len();
        let mut instance_adj = vec![Vec::new(); ni];
        for &(a, b) in &instance_edges {
            instance_adj[a as usize].push(EntityId(b));
            instance_adj[b as usize].push(EntityId(a));
        }
        for adj in &mut instance_adj {
            adj.sort_unstable();
        }

        let mut broader_edges = self.broader_edges;
        broader_edges.sort_unstable();
        broader_edges.dedup();
        let mut broader = vec![Vec::new(); nc];
        let mut narrower = vec![Vec::new(); nc];
        for &(child, parent) in &broader_edges {
            broader[child as usize].push(ConceptId(parent));
            narrower[parent as usize].push(ConceptId(child));
        }
        for list in narrower.iter_mut() {
            list.sort_unstable();
        }

        let mut ontology = self.ontology;
        ontology.sort_unstable();
        ontology.dedup();
        let mut psi = vec![Vec::new(); nc];
        let mut psi_inv = vec![Vec::new(); ni];
        for &(c, v) in &ontology {
            psi[c as usize].push(EntityId(v));
            psi_inv[v as usize].push(ConceptId(c));
        }
        for list in psi_inv.iter_mut() {
            list.sort_unstable();
        }

        if report.self_loops_dropped > 0 {
            tracing::warn!(count = report.self_loops_dropped, "dropped self-loop edges");
        }

        KnowledgeGraph {
            entities: self.entities,
            concepts: self.concepts,
            instance_adj,
            broader,
            narrower,
            psi,
            psi_inv,
            report,
        }
    }
}

fn edge_error(e: BuildError, line: usize, src: &str, dst: &str, kind: EdgeKind) -> Error {
    match e {
        BuildError::Undeclared(id) => Error::UndeclaredEndpoint { line, id },
        BuildError::Partition { detail } => Error::SpacePartition {
            line,
            kind: kind.as_str().to_owned(),
            src: src.to_owned(),
            dst: dst.to_owned(),
            detail,
        },
        BuildError::Conflict(id) => Error::ConflictingSpace { line, id },
    }
}

/// Yields `(line_number, trimmed_line)` for non-empty, non-comment lines.
fn records<R: BufRead>(reader: R) -> impl Iterator<Item = std::io::Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Err(e) => Some(Err(e)),
            Ok(l) => {
                let l = l.trim_end_matches(['\r', '\n']).to_owned();
                if l.trim().is_empty() || l.starts_with('#') {
                    None
                } else {
                    Some(Ok((i + 1, l)))
                }
            }
        })
}

fn parse_into<N: BufRead, E: BufRead>(
    nodes: N,
    edges: E,
    sink: &mut dyn FnMut(Error) -> bool,
) -> Result<GraphBuilder> {
    let mut b = GraphBuilder::new();
    for rec in records(nodes) {
        let (line, text) = rec?;
        let fields: Vec<&str> = text.split('\t').collect();
        let parsed = match fields.as_slice() {
            [id, space] if !id.is_empty() => Space::parse(space)
                .map(|s| (*id, s))
                .ok_or_else(|| format!("unknown space `{space}`")),
            _ => Err("expected `id<TAB>space`".to_owned()),
        };
        let err = match parsed {
            Ok((id, space)) => match b.declare(id, space) {
                Ok(()) => continue,
                Err(_) => Error::ConflictingSpace { line, id: id.to_owned() },
            },
            Err(reason) => Error::Malformed { source_name: "nodes", line, reason },
        };
        if !sink(err) {
            return Err(Error::InvalidParams("aborted".into()));
        }
    }
    for rec in records(edges) {
        let (line, text) = rec?;
        let fields: Vec<&str> = text.split('\t').collect();
        let err = match fields.as_slice() {
            [src, dst, kind] if !src.is_empty() && !dst.is_empty() => match EdgeKind::parse(kind) {
                Some(k) => match b.add_edge_inner(src, dst, k) {
                    Ok(()) => continue,
                    Err(e) => edge_error(e, line, src, dst, k),
                },
                None => Error::Malformed {
                    source_name: "edges",
                    line,
                    reason: format!("unknown edge kind `{kind}`"),
                },
            },
            _ => Error::Malformed {
                source_name: "edges",
                line,
                reason: "expected `src<TAB>dst<TAB>kind`".to_owned(),
            },
        };
        if !sink(err) {
            return Err(Error::InvalidParams("aborted".into()));
        }
    }
    Ok(b)
}

/// Loads and validates a graph from the nodes and edges record streams,
/// failing on the first invalid record.
pub fn load_graph<N: BufRead, E: BufRead>(nodes: N, edges: E) -> Result<KnowledgeGraph> {
    let mut first = None;
    let res = parse_into(nodes, edges, &mut |e| {
        first = Some(e);
        false
    });
    match (res, first) {
        (_, Some(e)) => Err(e),
        (Ok(b), None) => Ok(b.build()),
        (Err(e), None) => Err(e),
    }
}

/// Scans both streams and returns every violation instead of stopping at the first.
pub fn validate_graph<N: BufRead, E: BufRead>(nodes: N, edges: E) -> Result<Vec<Error>> {
    let mut found = Vec::new();
    parse_into(nodes, edges, &mut |e| {
        found.push(e);
        true
    })?;
    Ok(found)
}
