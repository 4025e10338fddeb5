#![allow(dead_code)]

use std::collections::BTreeSet;

use kgexplore::corpus::{ingest_documents, Corpus};
use kgexplore::graph::{EntityId, GraphBuilder, KnowledgeGraph};
use kgexplore::load_graph;
use kgexplore::synth::{gen_synthetic, SynthParams, SyntheticData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub data: SyntheticData,
    pub graph: KnowledgeGraph,
    pub corpus: Corpus,
}

pub fn synthetic(params: &SynthParams) -> Fixture {
    let data = gen_synthetic(params).expect("synthetic params are valid");
    let graph = load_graph(data.nodes_tsv.as_bytes(), data.edges_tsv.as_bytes()).expect("generated graph loads");
    let corpus = ingest_documents(data.documents_jsonl.as_bytes(), &graph).expect("generated corpus loads");
    Fixture { data, graph, corpus }
}

/// Erdős–Rényi style graph on `n` instances `n0..`, edge probability `p`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = GraphBuilder::new();
    for i in 0..n {
        b.add_instance(&format!("n{i}")).unwrap();
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                b.add_instance_edge(&format!("n{i}"), &format!("n{j}")).unwrap();
            }
        }
    }
    b.build()
}

/// Adjacency matrix by handle index.
pub fn adjacency(g: &KnowledgeGraph) -> Vec<Vec<bool>> {
    let n = g.instance_count();
    let mut m = vec![vec![false; n]; n];
    for a in g.entities() {
        for &b in g.neighbors(a) {
            m[a.index()][b.index()] = true;
        }
    }
    m
}

/// Counts `hops`-edge node-simple paths u→v by trying every ordered
/// selection of distinct intermediate nodes and keeping those whose
/// consecutive pairs are all adjacent.
pub fn permutation_count(adj: &[Vec<bool>], u: usize, v: usize, hops: usize) -> u64 {
    if u == v || hops == 0 {
        return 0;
    }
    let others: Vec<usize> = (0..adj.len()).filter(|&x| x != u && x != v).collect();
    let mut count = 0;
    let mut seq = Vec::with_capacity(hops + 1);
    seq.push(u);
    fn rec(adj: &[Vec<bool>], others: &[usize], seq: &mut Vec<usize>, left: usize, v: usize, count: &mut u64) {
        if left == 0 {
            seq.push(v);
            if seq.windows(2).all(|w| adj[w[0]][w[1]]) {
                *count += 1;
            }
            seq.pop();
            return;
        }
        for &x in others {
            if !seq.contains(&x) {
                seq.push(x);
                rec(adj, others, seq, left - 1, v, count);
                seq.pop();
            }
        }
    }
    rec(adj, &others, &mut seq, hops - 1, v, &mut count);
    count
}

/// Σ_v Σ_u Σ_l β^l · #paths, averaged over context, from the permutation oracle.
pub fn oracle_conn(g: &KnowledgeGraph, sources: &[EntityId], context: &[EntityId], tau: u32, beta: f64) -> f64 {
    let adj = adjacency(g);
    let mut total = 0.0;
    for &v in context {
        for &u in sources {
            for l in 1..=tau as usize {
                total += beta.powi(l as i32) * permutation_count(&adj, u.index(), v.index(), l) as f64;
            }
        }
    }
    total / context.len() as f64
}

/// Same quantity by depth-limited DFS over neighbor lists; fast enough for
/// a few hundred nodes at τ ≤ 3.
pub fn dfs_conn(g: &KnowledgeGraph, sources: &[EntityId], context: &[EntityId], tau: u32, beta: f64) -> f64 {
    fn walk(g: &KnowledgeGraph, path: &mut Vec<EntityId>, v: EntityId, tau: u32, beta: f64, acc: &mut f64) {
        let last = *path.last().unwrap();
        let len = path.len() as u32;
        for &n in g.neighbors(last) {
            if path.contains(&n) {
                continue;
            }
            if n == v {
                *acc += beta.powi(len as i32);
            } else if len < tau {
                path.push(n);
                walk(g, path, v, tau, beta, acc);
                path.pop();
            }
        }
    }
    let mut total = 0.0;
    for &v in context {
        for &u in sources {
            if u == v {
                continue;
            }
            let mut acc = 0.0;
            walk(g, &mut vec![u], v, tau, beta, &mut acc);
            total += acc;
        }
    }
    total / context.len() as f64
}

pub fn entity_set<'a>(g: &KnowledgeGraph, ids: impl IntoIterator<Item = &'a str>) -> BTreeSet<EntityId> {
    ids.into_iter().map(|s| g.entity(s).expect("known entity")).collect()
}
