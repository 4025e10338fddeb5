mod common;

use common::random_graph;
use kgexplore::hop::{HopCache, HopMap, HopOracle, KHopIndex};
use kgexplore::Error;
use proptest::prelude::*;

/// All-pairs hop distances, `u32::MAX` when unreachable.
fn floyd_warshall(g: &kgexplore::KnowledgeGraph) -> Vec<Vec<u32>> {
    let n = g.instance_count();
    let inf = u32::MAX / 2;
    let mut d = vec![vec![inf; n]; n];
    for a in g.entities() {
        d[a.index()][a.index()] = 0;
        for b in g.neighbors(a) {
            d[a.index()][b.index()] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hop_maps_match_floyd_warshall(n in 1usize..40, p in 0.02f64..0.3, seed in any::<u64>(), radius in 0u32..5) {
        let g = random_graph(n, p, seed);
        let fw = floyd_warshall(&g);
        let index = KHopIndex::build(&g, radius, usize::MAX).unwrap();
        for v in g.entities() {
            let hm = HopMap::build(&g, v, radius);
            for u in g.entities() {
                let d = fw[u.index()][v.index()];
                let want = (d <= radius).then_some(d);
                prop_assert_eq!(hm.hop(u), want);
                prop_assert_eq!(index.hop(u, v), want);
                for budget in 0..=radius {
                    prop_assert_eq!(hm.within(u, budget), d <= budget);
                }
            }
            prop_assert_eq!(hm.len(), g.entities().filter(|u| fw[u.index()][v.index()] <= radius).count());
        }
    }
}

#[test]
fn cache_and_index_serve_identical_maps() {
    let g = random_graph(60, 0.08, 4);
    let cache = HopCache::with_capacity(2, 8);
    let index = KHopIndex::build(&g, 2, usize::MAX).unwrap();
    for round in 0..3 {
        for v in g.entities() {
            let a = cache.hop_map(&g, v);
            let b = index.hop_map(&g, v);
            assert_eq!(*a, *b, "round {round} target {v:?}");
        }
    }
    assert!(cache.cached() <= 8);
    let (hits, misses) = cache.hit_stats();
    assert_eq!(hits + misses, 180);
}

#[test]
fn zero_capacity_cache_never_stores() {
    let g = random_graph(10, 0.3, 1);
    let cache = HopCache::with_capacity(2, 0);
    for v in g.entities() {
        cache.hop_map(&g, v);
    }
    assert_eq!(cache.cached(), 0);
}

#[test]
fn index_over_budget_fails() {
    let g = random_graph(50, 0.2, 2);
    assert!(matches!(KHopIndex::build(&g, 3, 64), Err(Error::MemoryBudget { budget: 64, .. })));
}
