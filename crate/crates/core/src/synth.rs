//! Synthetic knowledge graph and pre-linked corpus with a ground-truth ledger.
//!
//! The concept hierarchy is a heap-shaped tree (`C0` is the root, parent of
//! `Ci` is `C((i-1)/branching)`). Each leaf concept owns a cluster: its
//! instances plus a halo of related instances, wired together more densely
//! than the uniform background edges. Every document is planted on one leaf
//! concept: it mentions one or two of the leaf's instances, and its other
//! entities come from the leaf's halo with probability `cluster_affinity`
//! (uniformly from all instances otherwise).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentRecord, MentionRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub instance_count: usize,
    pub concept_count: usize,
    pub branching: usize,
    /// Inclusive range of |Ψ| for leaf concepts.
    pub leaf_fanout: (usize, usize),
    /// Share of the descendants' instances an inner concept maps to directly.
    pub broad_share: f64,
    /// Related non-member instances per leaf cluster.
    pub halo_size: usize,
    /// Expected number of intra-cluster neighbors per cluster member.
    pub intra_cluster_degree: f64,
    /// Target mean instance degree including background edges.
    pub mean_degree: f64,
    pub document_count: usize,
    /// Inclusive range of distinct entities per document.
    pub entities_per_doc: (usize, usize),
    /// Inclusive range of planted-concept instances per document.
    pub matched_per_doc: (usize, usize),
    pub cluster_affinity: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            instance_count: 400,
            concept_count: 21,
            branching: 4,
            leaf_fanout: (4, 10),
            broad_share: 0.25,
            halo_size: 12,
            intra_cluster_degree: 4.0,
            mean_degree: 6.0,
            document_count: 150,
            entities_per_doc: (4, 8),
            matched_per_doc: (1, 2),
            cluster_affinity: 0.8,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.instance_count < 2 || self.concept_count == 0 || self.branching == 0 {
            return bad("instance_count >= 2, concept_count >= 1 and branching >= 1 required".into());
        }
        if self.document_count == 0 {
            return bad("document_count must be positive".into());
        }
        let (lo, hi) = self.leaf_fanout;
        if lo == 0 || lo > hi || hi > self.instance_count {
            return bad(format!("leaf_fanout {lo}..={hi} infeasible for {} instances", self.instance_count));
        }
        if hi + self.halo_size > self.instance_count {
            return bad("leaf_fanout + halo_size exceeds instance_count".into());
        }
        let (elo, ehi) = self.entities_per_doc;
        let (mlo, mhi) = self.matched_per_doc;
        if elo == 0 || elo > ehi || mlo == 0 || mlo > mhi || mhi > elo || ehi > self.instance_count {
            return bad("entities_per_doc / matched_per_doc ranges are inconsistent".into());
        }
        for (name, p) in [("broad_share", self.broad_share), ("cluster_affinity", self.cluster_affinity)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability, got {p}"));
            }
        }
        let max_edges = self.instance_count * (self.instance_count - 1) / 2;
        if self.mean_degree < 0.0 || self.target_edges() > max_edges {
            return bad(format!("mean_degree {} infeasible", self.mean_degree));
        }
        Ok(())
    }

    fn target_edges(&self) -> usize {
        (self.instance_count as f64 * self.mean_degree / 2.0).round() as usize
    }
}

/// Ground truth recorded while generating.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorLedger {
    /// concept -> instances, sorted
    pub psi: BTreeMap<String, Vec<String>>,
    /// child concept -> parent concept
    pub parent: BTreeMap<String, String>,
    /// leaf concept -> halo instances, sorted
    pub clusters: BTreeMap<String, Vec<String>>,
    /// document -> planted positive concept
    pub document_concept: BTreeMap<String, String>,
    pub instance_edges: usize,
    pub document_frequency: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub nodes_tsv: String,
    pub edges_tsv: String,
    pub documents_jsonl: String,
    pub ledger: GeneratorLedger,
}

pub const NODES_FILE: &str = "nodes.tsv";
pub const EDGES_FILE: &str = "edges.tsv";
pub const DOCUMENTS_FILE: &str = "docs.jsonl";
pub const LEDGER_FILE: &str = "ledger.json";

impl SyntheticData {
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(NODES_FILE), &self.nodes_tsv)?;
        std::fs::write(dir.join(EDGES_FILE), &self.edges_tsv)?;
        std::fs::write(dir.join(DOCUMENTS_FILE), &self.documents_jsonl)?;
        std::fs::write(dir.join(LEDGER_FILE), serde_json::to_string_pretty(&self.ledger)?)?;
        Ok(())
    }
}

fn inclusive<R: Rng>(rng: &mut R, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

pub fn gen_synthetic(params: &SynthParams) -> Result<SyntheticData> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.instance_count;
    let inst = |i: usize| format!("e{i}");
    let conc = |i: usize| format!("C{i}");

    let parent = |i: usize| (i > 0).then(|| (i - 1) / params.branching);
    let mut children = vec![Vec::new(); params.concept_count];
    for i in 1..params.concept_count {
        children[parent(i).unwrap()].push(i);
    }
    let leaves: Vec<usize> = (0..params.concept_count).filter(|&i| children[i].is_empty()).collect();

    let mut psi: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); params.concept_count];
    let mut halo: Vec<Vec<usize>> = vec![Vec::new(); params.concept_count];
    for &leaf in &leaves {
        let size = inclusive(&mut rng, params.leaf_fanout);
        psi[leaf] = sample(&mut rng, n, size).into_iter().collect();
        let pool: Vec<usize> = (0..n).filter(|i| !psi[leaf].contains(i)).collect();
        let mut h: Vec<usize> = sample(&mut rng, pool.len(), params.halo_size)
            .into_iter()
            .map(|j| pool[j])
            .collect();
        h.sort_unstable();
        halo[leaf] = h;
    }
    // Inner concepts, deepest first so descendants are complete.
    for i in (0..params.concept_count).rev() {
        if children[i].is_empty() {
            continue;
        }
        let mut below = BTreeSet::new();
        let mut stack = children[i].clone();
        while let Some(c) = stack.pop() {
            below.extend(psi[c].iter().copied());
            stack.extend(children[c].iter().copied());
        }
        let below: Vec<usize> = below.into_iter().collect();
        if below.is_empty() {
            continue;
        }
        let take = ((below.len() as f64 * params.broad_share).round() as usize).clamp(1, below.len());
        psi[i] = sample(&mut rng, below.len(), take).into_iter().map(|j| below[j]).collect();
    }

    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let norm = |a: usize, b: usize| (a.min(b), a.max(b));
    for &leaf in &leaves {
        let members: Vec<usize> = psi[leaf].iter().copied().chain(halo[leaf].iter().copied()).collect();
        let m = members.len();
        if m < 2 {
            continue;
        }
        let p = (params.intra_cluster_degree / (m - 1) as f64).min(1.0);
        // a spanning chain keeps every cluster connected
        for w in members.windows(2) {
            edges.insert(norm(w[0], w[1]));
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if rng.random_bool(p) {
                    edges.insert(norm(members[i], members[j]));
                }
            }
        }
    }
    let target = params.target_edges();
    while edges.len() < target {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.insert(norm(a, b));
        }
    }

    let mut nodes_tsv = String::new();
    for i in 0..n {
        writeln!(nodes_tsv, "{}\tinstance", inst(i)).unwrap();
    }
    for i in 0..params.concept_count {
        writeln!(nodes_tsv, "{}\tconcept", conc(i)).unwrap();
    }
    let mut edges_tsv = String::new();
    for &(a, b) in &edges {
        writeln!(edges_tsv, "{}\t{}\tinstance", inst(a), inst(b)).unwrap();
    }
    for i in 1..params.concept_count {
        writeln!(edges_tsv, "{}\t{}\tbroader", conc(i), conc(parent(i).unwrap())).unwrap();
    }
    for (c, members) in psi.iter().enumerate() {
        for &v in members {
            writeln!(edges_tsv, "{}\t{}\tontology", inst(v), conc(c)).unwrap();
        }
    }

    let mut ledger = GeneratorLedger {
        instance_edges: edges.len(),
        ..Default::default()
    };
    for (c, members) in psi.iter().enumerate() {
        ledger.psi.insert(conc(c), members.iter().map(|&v| inst(v)).collect());
        if let Some(p) = parent(c) {
            ledger.parent.insert(conc(c), conc(p));
        }
    }
    for &leaf in &leaves {
        ledger.clusters.insert(conc(leaf), halo[leaf].iter().map(|&v| inst(v)).collect());
    }

    let mut documents_jsonl = String::new();
    for j in 0..params.document_count {
        let leaf = leaves[rng.random_range(0..leaves.len())];
        let members: Vec<usize> = psi[leaf].iter().copied().collect();
        let total = inclusive(&mut rng, params.entities_per_doc);
        let matched = inclusive(&mut rng, params.matched_per_doc).min(members.len());
        let mut chosen: Vec<usize> = sample(&mut rng, members.len(), matched)
            .into_iter()
            .map(|k| members[k])
            .collect();
        let mut used: HashSet<usize> = chosen.iter().copied().collect();
        let mut guard = 0;
        while chosen.len() < total && guard < 100 * total {
            guard += 1;
            let v = if rng.random_bool(params.cluster_affinity) && !halo[leaf].is_empty() {
                halo[leaf][rng.random_range(0..halo[leaf].len())]
            } else {
                rng.random_range(0..n)
            };
            if used.insert(v) {
                chosen.push(v);
            }
        }
        let id = format!("doc{j:04}");
        let record = DocumentRecord {
            id: id.clone(),
            title: format!("Synthetic story {j} about {}", conc(leaf)),
            body: None,
            entities: chosen
                .iter()
                .map(|&v| MentionRecord { id: inst(v), count: rng.random_range(1..=3) })
                .collect(),
        };
        for &v in &chosen {
            *ledger.document_frequency.entry(inst(v)).or_insert(0) += 1;
        }
        ledger.document_concept.insert(id, conc(leaf));
        documents_jsonl.push_str(&serde_json::to_string(&record)?);
        documents_jsonl.push('\n');
    }

    Ok(SyntheticData { nodes_tsv, edges_tsv, documents_jsonl, ledger })
}
