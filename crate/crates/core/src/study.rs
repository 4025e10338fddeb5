//! Desk-scale evaluation studies: estimator convergence and the
//! negative-concept check of context relevance.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::estimator::{estimator_error_profile, ConnQuery, ErrorRow};
use crate::graph::{ConceptId, EntityId, KnowledgeGraph};
use crate::hop::{HopCache, HopOracle};
use crate::index::InvertedIndex;
use crate::paths::ConnParams;
use crate::rng::{derive_seed, walk_rng};
use crate::scoring::{connectivity, context_relevance, ScoringParams};
use crate::synth::GeneratorLedger;

pub const DEFAULT_THETA_GRID: [usize; 6] = [1, 5, 10, 20, 50, 100];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ErrorRow>,
    pub pairs_used: usize,
    pub excluded_pairs: Vec<usize>,
}

impl ConvergenceTable {
    /// Tab-separated table with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("theta\tmode\tmean_relative_error\tci95\tsamples\n");
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{}",
                r.theta,
                r.mode.as_str(),
                r.mean_relative_error,
                r.ci95,
                r.samples
            )
            .unwrap();
        }
        out
    }
}

/// Mean relative estimation error per (θ, mode) over `pairs` × `seeds`.
pub fn convergence_study(
    g: &KnowledgeGraph,
    pairs: &[ConnQuery],
    p: &ConnParams,
    theta_grid: &[usize],
    seeds: usize,
    base_seed: u64,
) -> Result<ConvergenceTable> {
    let oracle = HopCache::new(p.tau);
    let profile = estimator_error_profile(g, &oracle, pairs, p, theta_grid, seeds, base_seed)?;
    if !profile.excluded_pairs.is_empty() {
        tracing::info!(excluded = profile.excluded_pairs.len(), "pairs with zero exact connectivity excluded");
    }
    Ok(ConvergenceTable {
        pairs_used: pairs.len() - profile.excluded_pairs.len(),
        excluded_pairs: profile.excluded_pairs,
        rows: profile.rows,
    })
}

/// Pairs of (planted concept instances, document context) from a synthetic
/// corpus: the first `limit` documents whose context is non-empty.
pub fn planted_pairs(g: &KnowledgeGraph, corpus: &Corpus, ledger: &GeneratorLedger, limit: usize) -> Vec<ConnQuery> {
    let mut out = Vec::new();
    for d in &corpus.documents {
        if out.len() == limit {
            break;
        }
        let Some(c) = ledger.document_concept.get(&d.id).and_then(|c| g.concept(c)) else {
            continue;
        };
        let psi = g.psi(c);
        let context: Vec<EntityId> = d.entities().filter(|v| psi.binary_search(v).is_err()).collect();
        if !context.is_empty() && !psi.is_empty() {
            out.push(ConnQuery::new(psi.to_vec(), context));
        }
    }
    out
}

/// Pairs for corpora without a generator ledger: per document, the most
/// specific concept that directly maps one of its entities (ties by concept
/// name), against the remaining entities.
pub fn document_pairs(g: &KnowledgeGraph, corpus: &Corpus, limit: usize) -> Vec<ConnQuery> {
    let mut out = Vec::new();
    for d in &corpus.documents {
        if out.len() == limit {
            break;
        }
        let best = d
            .entities()
            .flat_map(|v| g.psi_inverse(v).iter().copied())
            .min_by(|&a, &b| {
                g.psi(a)
                    .len()
                    .cmp(&g.psi(b).len())
                    .then_with(|| g.concept_name(a).cmp(g.concept_name(b)))
            });
        let Some(c) = best else { continue };
        let psi = g.psi(c);
        let context: Vec<EntityId> = d.entities().filter(|v| psi.binary_search(v).is_err()).collect();
        if !context.is_empty() {
            out.push(ConnQuery::new(psi.to_vec(), context));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeTrial {
    pub tau: u32,
    pub concept: String,
    pub document: String,
    pub negative: String,
    pub positive_cdr_c: f64,
    pub negative_cdr_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeRow {
    pub tau: u32,
    pub trials: usize,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// wins / trials
    pub win_fraction: f64,
    /// mean of positive minus negative cdr_c
    pub mean_gap: f64,
    /// One-sided sign test over non-tied trials.
    pub sign_test_p: f64,
    /// Share of positive cdr_c values that are exactly 0.
    pub zero_positive_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeStudy {
    pub rows: Vec<NegativeRow>,
    pub trials: Vec<NegativeTrial>,
}

impl NegativeStudy {
    pub fn row(&self, tau: u32) -> Option<&NegativeRow> {
        self.rows.iter().find(|r| r.tau == tau)
    }

    pub fn to_tsv(&self) -> String {
        let mut out =
            String::from("tau\ttrials\twins\tlosses\tties\twin_fraction\tmean_gap\tsign_test_p\tzero_positive_fraction\n");
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.6}\t{:.3e}\t{:.4}",
                r.tau, r.trials, r.wins, r.losses, r.ties, r.win_fraction, r.mean_gap, r.sign_test_p,
                r.zero_positive_fraction
            )
            .unwrap();
        }
        out
    }
}

/// One-sided sign test: P(X ≥ wins) for X ~ Binomial(wins + losses, 1/2).
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = (wins + losses) as u64;
    if wins == 0 || n == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    b.sf(wins as u64 - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeStudyParams {
    pub trials: usize,
    pub taus: Vec<u32>,
    /// Scoring setup; its `conn.tau` is replaced by each studied τ.
    pub scoring: ScoringParams,
    pub seed: u64,
}

impl Default for NegativeStudyParams {
    fn default() -> Self {
        NegativeStudyParams {
            trials: 100,
            taus: vec![1, 2, 3],
            scoring: ScoringParams::default(),
            seed: 0,
        }
    }
}

/// Samples index entries (c, d) with non-empty context, pairs each with a
/// uniformly drawn concept c' that has instances but matches nothing in d,
/// and compares cdr_c(c, d) against cdr_c(c', d) for every τ.
pub fn negative_concept_study(
    g: &KnowledgeGraph,
    ix: &InvertedIndex,
    corpus: &Corpus,
    params: &NegativeStudyParams,
) -> Result<NegativeStudy> {
    let depth = params.scoring.broaden_depth;
    let docs: HashMap<&str, &Document> = corpus.documents.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut extended: HashMap<ConceptId, Vec<EntityId>> = HashMap::new();
    let mut ext = |c: ConceptId| extended.entry(c).or_insert_with(|| g.extended_instances(c, depth)).clone();

    // (concept, document, sources, context) for entries with context
    let mut pool = Vec::new();
    for e in ix.entries() {
        let (Some(c), Some(d)) = (g.concept(&e.concept), docs.get(e.document.as_str())) else {
            continue;
        };
        let sources = ext(c);
        let context: Vec<EntityId> = d.entities().filter(|v| sources.binary_search(v).is_err()).collect();
        if !context.is_empty() {
            pool.push((c, *d, sources, context));
        }
    }
    if pool.is_empty() {
        return Err(Error::Study("index has no entries with context entities".into()));
    }
    let all_concepts: Vec<ConceptId> = g.concepts().filter(|&c| !g.psi(c).is_empty()).collect();
    let mut draws = Vec::with_capacity(params.trials);
    for t in 0..params.trials {
        let mut rng = walk_rng(params.seed, t as u64);
        let (c, d, sources, context) = &pool[rng.random_range(0..pool.len())];
        let negatives: Vec<ConceptId> = all_concepts
            .iter()
            .copied()
            .filter(|&n| {
                let s = ext(n);
                d.entities().all(|v| s.binary_search(&v).is_err())
            })
            .collect();
        if negatives.is_empty() {
            return Err(Error::Study(format!(
                "no concept is disjoint from document {}; corpus too small to draw negatives",
                d.id
            )));
        }
        let neg = negatives[rng.random_range(0..negatives.len())];
        let all_entities: Vec<EntityId> = d.entities().collect();
        draws.push((t, *c, *d, sources.clone(), context.clone(), neg, ext(neg), all_entities));
    }

    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for &tau in &params.taus {
        let mut scoring = params.scoring;
        scoring.conn.tau = tau;
        scoring.validate()?;
        let oracle = HopCache::new(tau);
        let score = |sources: &[EntityId], context: &[EntityId], seed: u64| -> Result<f64> {
            let (conn, _) = connectivity(g, &oracle as &dyn HopOracle, sources, context, &scoring, seed)?;
            context_relevance(conn)
        };
        let (mut wins, mut losses, mut ties, mut zeros) = (0, 0, 0, 0);
        let mut gap = 0.0;
        for (t, c, d, sources, context, neg, neg_sources, all_entities) in &draws {
            let tb = (*t as u64).to_le_bytes();
            let pos = score(sources, context, derive_seed(params.seed, &[&tb, &[tau as u8], b"pos"]))?;
            let negv = score(neg_sources, all_entities, derive_seed(params.seed, &[&tb, &[tau as u8], b"neg"]))?;
            match pos.total_cmp(&negv) {
                std::cmp::Ordering::Greater => wins += 1,
                std::cmp::Ordering::Less => losses += 1,
                std::cmp::Ordering::Equal => ties += 1,
            }
            if pos == 0.0 {
                zeros += 1;
            }
            gap += pos - negv;
            trials.push(NegativeTrial {
                tau,
                concept: g.concept_name(*c).to_owned(),
                document: d.id.clone(),
                negative: g.concept_name(*neg).to_owned(),
                positive_cdr_c: pos,
                negative_cdr_c: negv,
            });
        }
        let n = draws.len();
        rows.push(NegativeRow {
            tau,
            trials: n,
            wins,
            losses,
            ties,
            win_fraction: wins as f64 / n.max(1) as f64,
            mean_gap: gap / n.max(1) as f64,
            sign_test_p: sign_test_p(wins, losses),
            zero_positive_fraction: zeros as f64 / n.max(1) as f64,
        });
    }
    Ok(NegativeStudy { rows, trials })
}
