//! Exact bounded simple-path counting and the exact connectivity score.
//!
//! This is the ground truth the random-walk estimator is checked against, so
//! it favors plain depth-first enumeration over anything clever.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ConceptId, EntityId, KnowledgeGraph};

/// Default limit on DFS extensions before enumeration gives up.
pub const DEFAULT_EXTENSION_CAP: u64 = 10_000_000;

/// Hop constraint and damping factor of the connectivity score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnParams {
    pub tau: u32,
    pub beta: f64,
}

impl Default for ConnParams {
    fn default() -> Self {
        ConnParams { tau: 2, beta: 0.5 }
    }
}

impl ConnParams {
    pub fn new(tau: u32, beta: f64) -> Result<Self> {
        let p = ConnParams { tau, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau < 1 {
            return Err(Error::InvalidParams(format!("tau must be >= 1, got {}", self.tau)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParams(format!("beta must be in (0, 1], got {}", self.beta)));
        }
        Ok(())
    }
}

struct Budget {
    cap: u64,
    used: u64,
}

impl Budget {
    fn new(cap: u64) -> Self {
        Budget { cap, used: 0 }
    }

    #[inline]
    fn spend(&mut self, partial: u64) -> Result<()> {
        self.used += 1;
        if self.used > self.cap {
            Err(Error::EnumerationCap { cap: self.cap, partial })
        } else {
            Ok(())
        }
    }
}

/// Number of node-simple paths with exactly `hops` edges from `u` to `v`.
pub fn count_simple_paths(g: &KnowledgeGraph, u: EntityId, v: EntityId, hops: u32) -> Result<u64> {
    count_simple_paths_capped(g, u, v, hops, DEFAULT_EXTENSION_CAP)
}

pub fn count_simple_paths_capped(
    g: &KnowledgeGraph,
    u: EntityId,
    v: EntityId,
    hops: u32,
    cap: u64,
) -> Result<u64> {
    if u == v || hops == 0 {
        return Ok(0);
    }
    let mut path = vec![u];
    let mut count = 0;
    let mut budget = Budget::new(cap);
    count_rec(g, v, hops, &mut path, &mut count, &mut budget)?;
    Ok(count)
}

fn count_rec(
    g: &KnowledgeGraph,
    v: EntityId,
    hops: u32,
    path: &mut Vec<EntityId>,
    count: &mut u64,
    budget: &mut Budget,
) -> Result<()> {
    let depth = (path.len() - 1) as u32;
    let last = *path.last().unwrap();
    for &n in g.neighbors(last) {
        if path.contains(&n) {
            continue;
        }
        budget.spend(*count)?;
        if depth + 1 == hops {
            if n == v {
                *count += 1;
            }
        } else if n != v {
            path.push(n);
            count_rec(g, v, hops, path, count, budget)?;
            path.pop();
        }
    }
    Ok(())
}

/// All node-simple paths from `u` to `v` with 1..=`max_hops` edges, sorted lexicographically.
pub fn enumerate_paths(
    g: &KnowledgeGraph,
    u: EntityId,
    v: EntityId,
    max_hops: u32,
) -> Result<Vec<Vec<EntityId>>> {
    enumerate_paths_capped(g, u, v, max_hops, DEFAULT_EXTENSION_CAP)
}

pub fn enumerate_paths_capped(
    g: &KnowledgeGraph,
    u: EntityId,
    v: EntityId,
    max_hops: u32,
    cap: u64,
) -> Result<Vec<Vec<EntityId>>> {
    let mut out = Vec::new();
    if u == v {
        return Ok(out);
    }
    let mut path = vec![u];
    let mut budget = Budget::new(cap);
    enum_rec(g, v, max_hops, &mut path, &mut out, &mut budget)?;
    out.sort();
    Ok(out)
}

fn enum_rec(
    g: &KnowledgeGraph,
    v: EntityId,
    max_hops: u32,
    path: &mut Vec<EntityId>,
    out: &mut Vec<Vec<EntityId>>,
    budget: &mut Budget,
) -> Result<()> {
    if (path.len() - 1) as u32 == max_hops {
        return Ok(());
    }
    let last = *path.last().unwrap();
    for &n in g.neighbors(last) {
        if path.contains(&n) {
            continue;
        }
        budget.spend(out.len() as u64)?;
        path.push(n);
        if n == v {
            out.push(path.clone());
        } else {
            enum_rec(g, v, max_hops, path, out, budget)?;
        }
        path.pop();
    }
    Ok(())
}

/// Exact connectivity between a source set and a context set:
/// the average over context entities `v` of Σ_u Σ_l β^l · #(l-hop simple paths u→v).
///
/// `sources` must be sorted; `context` may repeat entries (each occurrence is
/// one term of the average).
pub fn exact_conn_between(
    g: &KnowledgeGraph,
    sources: &[EntityId],
    context: &[EntityId],
    p: &ConnParams,
) -> Result<f64> {
    exact_conn_between_capped(g, sources, context, p, DEFAULT_EXTENSION_CAP)
}

pub fn exact_conn_between_capped(
    g: &KnowledgeGraph,
    sources: &[EntityId],
    context: &[EntityId],
    p: &ConnParams,
    cap: u64,
) -> Result<f64> {
    p.validate()?;
    if context.is_empty() {
        return Err(Error::EmptyContext);
    }
    debug_assert!(sources.windows(2).all(|w| w[0] < w[1]), "sources must be sorted");
    if let Some(v) = context.iter().find(|v| sources.binary_search(v).is_ok()) {
        return Err(Error::InvalidParams(format!(
            "context entity {} is also a source",
            g.entity_name(*v)
        )));
    }
    let powers: Vec<f64> = (0..=p.tau).map(|l| p.beta.powi(l as i32)).collect();
    let mut budget = Budget::new(cap);
    let mut total = 0.0;
    for &v in context {
        // Paths are symmetric, so walk outward from v and credit every source hit.
        let mut path = vec![v];
        let mut acc = 0.0;
        conn_rec(g, sources, p.tau, &powers, &mut path, &mut acc, &mut budget)?;
        total += acc;
    }
    Ok(total / context.len() as f64)
}

fn conn_rec(
    g: &KnowledgeGraph,
    sources: &[EntityId],
    tau: u32,
    powers: &[f64],
    path: &mut Vec<EntityId>,
    acc: &mut f64,
    budget: &mut Budget,
) -> Result<()> {
    let depth = path.len() as u32; // hops after the next extension
    let last = *path.last().unwrap();
    for &n in g.neighbors(last) {
        if path.contains(&n) {
            continue;
        }
        budget.spend(0)?;
        if sources.binary_search(&n).is_ok() {
            *acc += powers[depth as usize];
        }
        if depth < tau {
            path.push(n);
            conn_rec(g, sources, tau, powers, path, acc, budget)?;
            path.pop();
        }
    }
    Ok(())
}

/// Exact connectivity of concept `c` (sources Ψ(c)) to `context`.
pub fn exact_conn(
    g: &KnowledgeGraph,
    c: ConceptId,
    context: &[EntityId],
    p: &ConnParams,
) -> Result<f64> {
    exact_conn_between(g, g.psi(c), context, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_graph;

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> KnowledgeGraph {
        let n: String = nodes.iter().map(|x| format!("{x}\tinstance\n")).collect();
        let e: String = edges.iter().map(|(a, b)| format!("{a}\t{b}\tinstance\n")).collect();
        load_graph(n.as_bytes(), e.as_bytes()).unwrap()
    }

    #[test]
    fn chain_counts() {
        let g = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let id = |n| g.entity(n).unwrap();
        assert_eq!(count_simple_paths(&g, id("a"), id("c"), 2).unwrap(), 1);
        assert_eq!(count_simple_paths(&g, id("a"), id("c"), 1).unwrap(), 0);
        assert_eq!(
            enumerate_paths(&g, id("a"), id("c"), 2).unwrap(),
            vec![vec![id("a"), id("b"), id("c")]]
        );
    }

    #[test]
    fn triangle_counts() {
        let g = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c"), ("c", "a")]);
        let id = |n| g.entity(n).unwrap();
        assert_eq!(count_simple_paths(&g, id("a"), id("c"), 1).unwrap(), 1);
        assert_eq!(count_simple_paths(&g, id("a"), id("c"), 2).unwrap(), 1);
        assert_eq!(count_simple_paths(&g, id("a"), id("c"), 3).unwrap(), 0);
    }

    #[test]
    fn edgeless_enumeration_is_empty() {
        let g = graph(&["a", "b"], &[]);
        let id = |n| g.entity(n).unwrap();
        assert!(enumerate_paths(&g, id("a"), id("b"), 3).unwrap().is_empty());
    }

    #[test]
    fn chain_conn_pin() {
        let g = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let id = |n| g.entity(n).unwrap();
        let v = exact_conn_between(&g, &[id("a")], &[id("c")], &ConnParams::default()).unwrap();
        assert_eq!(v, 0.25);
    }

    #[test]
    fn disconnected_conn_is_zero() {
        let g = graph(&["a", "b", "c", "d"], &[("a", "b")]);
        let id = |n| g.entity(n).unwrap();
        let v = exact_conn_between(&g, &[id("a")], &[id("d")], &ConnParams::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn conn_errors() {
        let g = graph(&["a", "b"], &[("a", "b")]);
        let id = |n| g.entity(n).unwrap();
        let p = ConnParams::default();
        assert!(matches!(exact_conn_between(&g, &[id("a")], &[], &p), Err(Error::EmptyContext)));
        assert!(exact_conn_between(&g, &[id("a")], &[id("a")], &p).is_err());
        assert!(ConnParams::new(0, 0.5).is_err());
        assert!(ConnParams::new(2, 0.0).is_err());
        assert!(ConnParams::new(2, 1.5).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        let names: Vec<String> = (0..8).map(|i| format!("n{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut edges = Vec::new();
        for i in 0..8 {
            for j in (i + 1)..8 {
                edges.push((refs[i], refs[j]));
            }
        }
        let g = graph(&refs, &edges);
        let (a, b) = (g.entity("n0").unwrap(), g.entity("n7").unwrap());
        assert!(matches!(
            enumerate_paths_capped(&g, a, b, 4, 20),
            Err(Error::EnumerationCap { cap: 20, .. })
        ));
    }
}
