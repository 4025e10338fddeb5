mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::synthetic;
use kgexplore::graph::{validate_graph, GraphBuilder, KnowledgeGraph};
use kgexplore::synth::{gen_synthetic, SynthParams};
use kgexplore::{load_graph, Error};
use proptest::prelude::*;

/// Random DAG of broader edges: concept i may point to any j < i.
fn random_hierarchy(n: usize, edges: &[(usize, usize)]) -> KnowledgeGraph {
    let mut b = GraphBuilder::new();
    for i in 0..n {
        b.add_concept(&format!("c{i}")).unwrap();
    }
    for &(a, z) in edges {
        let (lo, hi) = (a.min(z), a.max(z));
        if lo != hi && hi < n {
            b.add_broader(&format!("c{hi}"), &format!("c{lo}")).unwrap();
        }
    }
    b.build()
}

/// Level-by-level expansion over explicit edge pairs.
fn oracle_reach(edges: &BTreeSet<(usize, usize)>, start: usize, depth: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut frontier = vec![start];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &x in &frontier {
            for &(a, z) in edges {
                if a == x && seen.insert(z) {
                    next.push(z);
                }
            }
        }
        frontier = next;
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hierarchy_traversal_matches_oracle(
        n in 1usize..20,
        raw in prop::collection::vec((0usize..20, 0usize..20), 0..40),
        depth in 0usize..5,
    ) {
        let g = random_hierarchy(n, &raw);
        let up: BTreeSet<(usize, usize)> = raw
            .iter()
            .filter(|(a, z)| a != z && (*a).max(*z) < n)
            .map(|&(a, z)| (a.max(z), a.min(z)))
            .collect();
        let down: BTreeSet<(usize, usize)> = up.iter().map(|&(a, z)| (z, a)).collect();
        let idx = |name: &str| name[1..].parse::<usize>().unwrap();
        for c in g.concepts() {
            let i = idx(g.concept_name(c));
            let got_up: BTreeSet<usize> = g.broadened_concepts(c, depth).iter().map(|&x| idx(g.concept_name(x))).collect();
            let got_down: BTreeSet<usize> = g.narrower_descendants(c, depth).iter().map(|&x| idx(g.concept_name(x))).collect();
            prop_assert_eq!(got_up, oracle_reach(&up, i, depth));
            prop_assert_eq!(got_down, oracle_reach(&down, i, depth));
        }
        // duality: a ∈ up(b, k) iff b ∈ down(a, k)
        for a in g.concepts() {
            for b in g.concepts() {
                prop_assert_eq!(
                    g.broadened_concepts(b, depth).contains(&a),
                    g.narrower_descendants(a, depth).contains(&b)
                );
            }
        }
        prop_assert!(g.check_invariants().is_ok());
    }

    #[test]
    fn instance_adjacency_is_symmetric_and_loop_free(seed in any::<u64>()) {
        let fx = synthetic(&SynthParams { instance_count: 120, document_count: 10, seed, ..SynthParams::default() });
        let g = &fx.graph;
        for a in g.entities() {
            prop_assert!(!g.neighbors(a).contains(&a));
            prop_assert!(g.neighbors(a).windows(2).all(|w| w[0] < w[1]));
            for &b in g.neighbors(a) {
                prop_assert!(g.neighbors(b).contains(&a));
            }
        }
    }
}

#[test]
fn psi_matches_generator_ledger_exhaustively() {
    let fx = synthetic(&SynthParams { seed: 5, ..SynthParams::default() });
    let g = &fx.graph;
    let ledger = &fx.data.ledger;
    for c in g.concepts() {
        let got: Vec<&str> = g.psi(c).iter().map(|&v| g.entity_name(v)).collect::<BTreeSet<_>>().into_iter().collect();
        let want: Vec<&str> = ledger.psi[g.concept_name(c)].iter().map(String::as_str).collect::<BTreeSet<_>>().into_iter().collect();
        assert_eq!(got, want, "concept {}", g.concept_name(c));
    }
    // Ψ⁻¹ is the transpose of Ψ
    let mut inverse: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (c, members) in &ledger.psi {
        for v in members {
            inverse.entry(v.as_str()).or_default().insert(c.as_str());
        }
    }
    for v in g.entities() {
        let got: BTreeSet<&str> = g.psi_inverse(v).iter().map(|&c| g.concept_name(c)).collect();
        assert_eq!(got, inverse.get(g.entity_name(v)).cloned().unwrap_or_default());
    }
    for (child, parent) in &ledger.parent {
        let c = g.concept(child).unwrap();
        assert_eq!(g.broader_of(c), &[g.concept(parent).unwrap()]);
    }
    assert_eq!(g.stats().instance_edges, ledger.instance_edges);
}

#[test]
fn extended_instances_are_union_over_descendants() {
    let fx = synthetic(&SynthParams { seed: 8, ..SynthParams::default() });
    let g = &fx.graph;
    for c in g.concepts() {
        for depth in 0..3 {
            let want: BTreeSet<_> = g
                .narrower_descendants(c, depth)
                .iter()
                .flat_map(|&x| g.psi(x).to_vec())
                .collect();
            let got: BTreeSet<_> = g.extended_instances(c, depth).into_iter().collect();
            assert_eq!(got, want);
        }
        assert_eq!(g.extended_instances(c, 0), g.psi(c));
    }
}

#[test]
fn synthetic_mean_degree_near_target() {
    for seed in 0..10 {
        let params = SynthParams { seed, document_count: 5, ..SynthParams::default() };
        let data = gen_synthetic(&params).unwrap();
        let g = load_graph(data.nodes_tsv.as_bytes(), data.edges_tsv.as_bytes()).unwrap();
        let mean = 2.0 * g.stats().instance_edges as f64 / g.instance_count() as f64;
        assert!(
            (mean - params.mean_degree).abs() <= 0.1 * params.mean_degree,
            "seed {seed}: mean degree {mean}"
        );
    }
}

#[test]
fn loader_reports_line_numbers() {
    let nodes = "# comment\na\tinstance\nb\tinstance\n\nC\tconcept\n";
    let edges = "a\tb\tinstance\na\tC\tinstance\n";
    let err = load_graph(nodes.as_bytes(), edges.as_bytes()).unwrap_err();
    match err {
        Error::SpacePartition { line, .. } => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
    assert!(err_text(nodes, "a\tzz\tinstance\n").contains("zz"));
    let all = validate_graph(nodes.as_bytes(), "a\tzz\tinstance\nb\tC\tbroader\nC\tb\tontology\n".as_bytes()).unwrap();
    assert_eq!(all.len(), 3);
}

fn err_text(nodes: &str, edges: &str) -> String {
    load_graph(nodes.as_bytes(), edges.as_bytes()).unwrap_err().to_string()
}

#[test]
fn unknown_concept_lookup_fails() {
    let g = random_hierarchy(3, &[(0, 1)]);
    assert!(matches!(g.instances_of("nope"), Err(Error::UnknownConcept(_))));
    assert!(g.concept("c1").is_some());
}
