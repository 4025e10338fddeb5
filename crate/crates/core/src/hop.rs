//! Bounded-hop distance oracle over the instance space.
//!
//! The random-walk estimator repeatedly asks "can neighbor `n` still reach
//! target `v` within the remaining budget?" for one fixed `v`. A [`HopMap`]
//! answers all of those after a single radius-bounded BFS from `v`.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph};
use crate::par;

/// BFS distances to one target, truncated at `radius`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMap {
    target: EntityId,
    radius: u32,
    distances: HashMap<EntityId, u32>,
}

impl HopMap {
    pub fn build(g: &KnowledgeGraph, target: EntityId, radius: u32) -> HopMap {
        let mut distances = HashMap::new();
        distances.insert(target, 0);
        let mut queue = VecDeque::from([target]);
        while let Some(x) = queue.pop_front() {
            let d = distances[&x];
            if d == radius {
                continue;
            }
            for &n in g.neighbors(x) {
                distances.entry(n).or_insert_with(|| {
                    queue.push_back(n);
                    d + 1
                });
            }
        }
        HopMap { target, radius, distances }
    }

    /// Name-checked variant of [`HopMap::build`].
    pub fn build_named(g: &KnowledgeGraph, target: &str, radius: u32) -> Result<HopMap> {
        let v = g
            .entity(target)
            .ok_or_else(|| Error::UnknownEntity(target.to_owned()))?;
        Ok(Self::build(g, v, radius))
    }

    pub fn target(&self) -> EntityId {
        self.target
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// `Some(d)` when `n` reaches the target in `d ≤ radius` hops, `None` otherwise.
    #[inline]
    pub fn hop(&self, n: EntityId) -> Option<u32> {
        self.distances.get(&n).copied()
    }

    #[inline]
    pub fn within(&self, n: EntityId, budget: u32) -> bool {
        matches!(self.hop(n), Some(d) if d <= budget)
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityId, u32)> + '_ {
        self.distances.iter().map(|(&k, &v)| (k, v))
    }

    fn approx_bytes(&self) -> usize {
        std::mem::size_of::<Self>()
            + self.distances.capacity() * (std::mem::size_of::<(EntityId, u32)>() + 1)
    }
}

/// Source of per-target hop maps for the walk estimator.
pub trait HopOracle: Send + Sync {
    /// Radius the returned maps are complete up to.
    fn radius(&self) -> u32;

    fn hop_map(&self, g: &KnowledgeGraph, target: EntityId) -> Arc<HopMap>;
}

/// On-demand BFS per target, memoized in a small LRU.
#[derive(Debug)]
pub struct HopCache {
    radius: u32,
    capacity: usize,
    state: Mutex<LruState>,
}

#[derive(Debug, Default)]
struct LruState {
    tick: u64,
    maps: HashMap<EntityId, (Arc<HopMap>, u64)>,
    hits: u64,
    misses: u64,
}

pub const DEFAULT_HOP_CACHE_CAPACITY: usize = 4096;

impl HopCache {
    pub fn new(radius: u32) -> Self {
        Self::with_capacity(radius, DEFAULT_HOP_CACHE_CAPACITY)
    }

    /// `capacity == 0` disables memoization.
    pub fn with_capacity(radius: u32, capacity: usize) -> Self {
        HopCache {
            radius,
            capacity,
            state: Mutex::new(LruState::default()),
        }
    }

    pub fn cached(&self) -> usize {
        self.state.lock().unwrap().maps.len()
    }

    /// (hits, misses)
    pub fn hit_stats(&self) -> (u64, u64) {
        let s = self.state.lock().unwrap();
        (s.hits, s.misses)
    }
}

impl HopOracle for HopCache {
    fn radius(&self) -> u32 {
        self.radius
    }

    fn hop_map(&self, g: &KnowledgeGraph, target: EntityId) -> Arc<HopMap> {
        {
            let mut s = self.state.lock().unwrap();
            s.tick += 1;
            let tick = s.tick;
            if let Some(entry) = s.maps.get_mut(&target) {
                entry.1 = tick;
                let map = entry.0.clone();
                s.hits += 1;
                return map;
            }
            s.misses += 1;
        }
        // Built outside the lock; a racing duplicate build yields an identical map.
        let map = Arc::new(HopMap::build(g, target, self.radius));
        if self.capacity == 0 {
            return map;
        }
        let mut s = self.state.lock().unwrap();
        if s.maps.len() >= self.capacity && !s.maps.contains_key(&target) {
            if let Some(oldest) = s.maps.iter().min_by_key(|(_, (_, t))| *t).map(|(k, _)| *k) {
                s.maps.remove(&oldest);
            }
        }
        let tick = s.tick;
        s.maps.insert(target, (map.clone(), tick));
        map
    }
}

/// Eagerly precomputed hop maps for every instance entity.
#[derive(Debug)]
pub struct KHopIndex {
    radius: u32,
    maps: Vec<Arc<HopMap>>,
    build_time: Duration,
    approx_bytes: usize,
}

impl KHopIndex {
    /// Fails with [`Error::MemoryBudget`] as soon as the running size estimate
    /// passes `memory_budget` bytes.
    pub fn build(g: &KnowledgeGraph, radius: u32, memory_budget: usize) -> Result<KHopIndex> {
        let start = Instant::now();
        let n = g.instance_count();
        let mut maps = Vec::with_capacity(n);
        let mut bytes = 0usize;
        const CHUNK: usize = 512;
        for lo in (0..n).step_by(CHUNK) {
            let hi = (lo + CHUNK).min(n);
            let chunk = par::map_range(hi - lo, |i| HopMap::build(g, EntityId((lo + i) as u32), radius));
            for m in chunk {
                bytes += m.approx_bytes();
                maps.push(Arc::new(m));
            }
            if bytes > memory_budget {
                let needed = bytes / hi * n;
                return Err(Error::MemoryBudget { needed, budget: memory_budget });
            }
        }
        Ok(KHopIndex {
            radius,
            maps,
            build_time: start.elapsed(),
            approx_bytes: bytes,
        })
    }

    /// hop(n, v) for any pair, `None` when beyond the radius.
    pub fn hop(&self, n: EntityId, v: EntityId) -> Option<u32> {
        self.maps[v.index()].hop(n)
    }

    pub fn build_time(&self) -> Duration {
        self.build_time
    }

    pub fn approx_bytes(&self) -> usize {
        self.approx_bytes
    }
}

impl HopOracle for KHopIndex {
    fn radius(&self) -> u32 {
        self.radius
    }

    fn hop_map(&self, _g: &KnowledgeGraph, target: EntityId) -> Arc<HopMap> {
        self.maps[target.index()].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_graph;

    fn chain() -> KnowledgeGraph {
        load_graph(
            "a\tinstance\nb\tinstance\nc\tinstance\n".as_bytes(),
            "a\tb\tinstance\nb\tc\tinstance\n".as_bytes(),
        )
        .unwrap()
    }

    #[test]
    fn chain_distances() {
        let g = chain();
        let id = |n| g.entity(n).unwrap();
        let hm = HopMap::build(&g, id("c"), 2);
        assert_eq!(hm.hop(id("c")), Some(0));
        assert_eq!(hm.hop(id("b")), Some(1));
        assert_eq!(hm.hop(id("a")), Some(2));
        let hm = HopMap::build(&g, id("c"), 1);
        assert_eq!(hm.hop(id("a")), None);
        let hm = HopMap::build(&g, id("c"), 0);
        assert_eq!(hm.len(), 1);
        assert_eq!(hm.hop(id("b")), None);
    }

    #[test]
    fn unknown_target() {
        let g = chain();
        assert!(matches!(HopMap::build_named(&g, "zz", 2), Err(Error::UnknownEntity(_))));
    }

    #[test]
    fn cache_evicts_least_recent() {
        let g = chain();
        let id = |n| g.entity(n).unwrap();
        let cache = HopCache::with_capacity(2, 2);
        cache.hop_map(&g, id("a"));
        cache.hop_map(&g, id("b"));
        cache.hop_map(&g, id("a"));
        cache.hop_map(&g, id("c"));
        assert_eq!(cache.cached(), 2);
        let (hits, misses) = cache.hit_stats();
        assert_eq!((hits, misses), (1, 3));
        // b was least recently used
        cache.hop_map(&g, id("a"));
        assert_eq!(cache.hit_stats().0, 2);
    }

    #[test]
    fn index_on_edgeless_graph() {
        let g = load_graph("a\tinstance\nb\tinstance\n".as_bytes(), "".as_bytes()).unwrap();
        let ix = KHopIndex::build(&g, 3, usize::MAX).unwrap();
        let (a, b) = (g.entity("a").unwrap(), g.entity("b").unwrap());
        assert_eq!(ix.hop(a, b), None);
        assert_eq!(ix.hop(a, a), Some(0));
    }

    #[test]
    fn index_budget() {
        let g = chain();
        let err = KHopIndex::build(&g, 2, 10).unwrap_err();
        assert!(matches!(err, Error::MemoryBudget { .. }));
    }
}
