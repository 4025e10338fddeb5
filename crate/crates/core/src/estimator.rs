//! Random-walk Horvitz–Thompson estimator of the connectivity score.
//!
//! One walk draws a source `u` uniformly from the concept's instances and a
//! target `v` uniformly from the context, then extends a non-repeating walk
//! for at most `tau` hops. Each step picks uniformly (reservoir, one pass)
//! among the eligible neighbors of the current node and multiplies the
//! inverse sampling probability by their count. A walk that lands on `v`
//! after `h` hops contributes `beta^h · ∏ N(u_i)`; anything else contributes 0.
//!
//! In pruned mode a neighbor is eligible only if it can still reach `v` in
//! the remaining hop budget, which removes most dead-end walks. Both modes
//! exclude already visited nodes so that sampled walks are simple paths.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ConceptId, EntityId, KnowledgeGraph};
use crate::hop::{HopMap, HopOracle};
use crate::par;
use crate::paths::{exact_conn_between, ConnParams};
use crate::rng::{derive_seed, walk_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkMode {
    Pruned,
    Unpruned,
}

impl WalkMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WalkMode::Pruned => "pruned",
            WalkMode::Unpruned => "unpruned",
        }
    }
}

/// Eligibility rule for one walk.
#[derive(Debug, Clone, Copy)]
pub enum WalkGuide<'a> {
    /// Hop map of the walk's target; must cover radius `tau - 1`.
    Pruned(&'a HopMap),
    Unpruned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkOutcome {
    pub success: bool,
    /// Nodes on the walk including the source (and the target on success).
    pub nodes_sampled: u32,
    /// Product of eligible-neighbor counts over the steps taken.
    pub inverse_probability: f64,
    /// `beta^(nodes_sampled - 1) · inverse_probability` on success, else 0.
    pub contribution: f64,
    pub path: Vec<EntityId>,
}

/// Draws the source uniformly from `sources` and walks toward `v`.
pub fn single_walk<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    guide: WalkGuide<'_>,
    sources: &[EntityId],
    v: EntityId,
    p: &ConnParams,
    rng: &mut R,
) -> WalkOutcome {
    debug_assert!(!sources.is_empty());
    let u = sources[rng.random_range(0..sources.len())];
    walk_from(g, guide, u, v, p, rng)
}

/// Walk from a fixed source `u`.
pub fn walk_from<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    guide: WalkGuide<'_>,
    u: EntityId,
    v: EntityId,
    p: &ConnParams,
    rng: &mut R,
) -> WalkOutcome {
    assert_ne!(u, v, "source and target coincide");
    if let WalkGuide::Pruned(hm) = guide {
        debug_assert_eq!(hm.target(), v);
        debug_assert!(hm.radius() + 1 >= p.tau);
    }
    let mut path = Vec::with_capacity(p.tau as usize + 1);
    path.push(u);
    let mut inverse_probability = 1.0;
    // `l` is the number of nodes sampled so far
    let mut l = 1u32;
    while l <= p.tau {
        let cur = path[path.len() - 1];
        let budget = p.tau - l;
        let mut count = 0u32;
        let mut chosen = None;
        for &n in g.neighbors(cur) {
            if path.contains(&n) {
                continue;
            }
            if let WalkGuide::Pruned(hm) = guide {
                if !hm.within(n, budget) {
                    continue;
                }
            }
            count += 1;
            if rng.random_range(0..count) == 0 {
                chosen = Some(n);
            }
        }
        let Some(next) = chosen else {
            break;
        };
        inverse_probability *= count as f64;
        path.push(next);
        l += 1;
        if next == v {
            return WalkOutcome {
                success: true,
                nodes_sampled: l,
                inverse_probability,
                contribution: p.beta.powi(l as i32 - 1) * inverse_probability,
                path,
            };
        }
    }
    WalkOutcome {
        success: false,
        nodes_sampled: path.len() as u32,
        inverse_probability,
        contribution: 0.0,
        path,
    }
}

/// Probability that one estimator draw samples exactly `path` (source first,
/// target last), given `|sources|` and `|context|`. Returns 0 for paths the
/// walk cannot produce.
pub fn path_probability(
    g: &KnowledgeGraph,
    guide: WalkGuide<'_>,
    source_count: usize,
    context_count: usize,
    path: &[EntityId],
    p: &ConnParams,
) -> f64 {
    if path.len() < 2 || path.len() as u32 > p.tau + 1 {
        return 0.0;
    }
    let mut prob = 1.0 / (source_count as f64 * context_count as f64);
    for i in 0..path.len() - 1 {
        let prefix = &path[..=i];
        let budget = p.tau - (i as u32 + 1);
        let eligible: Vec<EntityId> = g
            .neighbors(path[i])
            .iter()
            .copied()
            .filter(|n| !prefix.contains(n))
            .filter(|n| match guide {
                WalkGuide::Pruned(hm) => hm.within(*n, budget),
                WalkGuide::Unpruned => true,
            })
            .collect();
        if !eligible.contains(&path[i + 1]) {
            return 0.0;
        }
        prob /= eligible.len() as f64;
    }
    prob
}

/// Number of walks, base seed and walk mode for one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub theta: usize,
    pub seed: u64,
    pub mode: WalkMode,
}

impl SampleSpec {
    pub fn pruned(theta: usize, seed: u64) -> Self {
        SampleSpec { theta, seed, mode: WalkMode::Pruned }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnEstimate {
    pub mean: f64,
    pub theta: usize,
    pub success_count: usize,
    /// Unbiased variance of the per-walk values `|sources| · contribution`.
    pub sample_variance: f64,
    pub seed: u64,
    pub mode: WalkMode,
}

impl ConnEstimate {
    pub fn standard_error(&self) -> f64 {
        (self.sample_variance / self.theta as f64).sqrt()
    }
}

/// Averages `spec.theta` walks; walk `i` uses its own substream of `spec.seed`
/// and redraws the target from `context`.
pub fn estimate_conn_between(
    g: &KnowledgeGraph,
    oracle: &dyn HopOracle,
    sources: &[EntityId],
    context: &[EntityId],
    p: &ConnParams,
    spec: SampleSpec,
) -> Result<ConnEstimate> {
    p.validate()?;
    if sources.is_empty() {
        return Err(Error::EmptySources);
    }
    if context.is_empty() {
        return Err(Error::EmptyContext);
    }
    if spec.theta == 0 {
        return Err(Error::InvalidParams("theta must be >= 1".into()));
    }
    if spec.mode == WalkMode::Pruned && oracle.radius() + 1 < p.tau {
        return Err(Error::InvalidParams(format!(
            "hop oracle radius {} too small for tau {}",
            oracle.radius(),
            p.tau
        )));
    }
    let hop_maps: Vec<_> = match spec.mode {
        WalkMode::Pruned => context.iter().map(|&v| Some(oracle.hop_map(g, v))).collect(),
        WalkMode::Unpruned => vec![None; context.len()],
    };
    let scale = sources.len() as f64;
    let values = par::map_range(spec.theta, |i| {
        let mut rng = walk_rng(spec.seed, i as u64);
        let t = rng.random_range(0..context.len());
        let guide = match &hop_maps[t] {
            Some(hm) => WalkGuide::Pruned(hm),
            None => WalkGuide::Unpruned,
        };
        single_walk(g, guide, sources, context[t], p, &mut rng).contribution * scale
    });
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sample_variance = if values.len() > 1 {
        values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(ConnEstimate {
        mean,
        theta: spec.theta,
        success_count: values.iter().filter(|&&x| x > 0.0).count(),
        sample_variance,
        seed: spec.seed,
        mode: spec.mode,
    })
}

/// Estimate for concept `c`, sourcing walks from Ψ(c).
pub fn estimate_conn(
    g: &KnowledgeGraph,
    oracle: &dyn HopOracle,
    c: ConceptId,
    context: &[EntityId],
    p: &ConnParams,
    spec: SampleSpec,
) -> Result<ConnEstimate> {
    estimate_conn_between(g, oracle, g.psi(c), context, p, spec)
}

/// A (sources, context) pair scored by the estimator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnQuery {
    /// Sorted, distinct.
    pub sources: Vec<EntityId>,
    pub context: Vec<EntityId>,
}

impl ConnQuery {
    pub fn new(mut sources: Vec<EntityId>, context: Vec<EntityId>) -> Self {
        sources.sort_unstable();
        sources.dedup();
        ConnQuery { sources, context }
    }

    pub fn for_concept(g: &KnowledgeGraph, c: ConceptId, context: Vec<EntityId>) -> Self {
        ConnQuery { sources: g.psi(c).to_vec(), context }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub theta: usize,
    pub mode: WalkMode,
    pub mean_relative_error: f64,
    /// Half width of the normal 95% interval of the mean.
    pub ci95: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorProfile {
    pub rows: Vec<ErrorRow>,
    /// Indices of input pairs dropped because their exact score is 0.
    pub excluded_pairs: Vec<usize>,
}

impl ErrorProfile {
    pub fn row(&self, theta: usize, mode: WalkMode) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.theta == theta && r.mode == mode)
    }
}

/// Mean relative error `|est - exact| / exact` over pairs and repeats, for
/// every `theta` in the grid and both walk modes.
pub fn estimator_error_profile(
    g: &KnowledgeGraph,
    oracle: &dyn HopOracle,
    pairs: &[ConnQuery],
    p: &ConnParams,
    theta_grid: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<ErrorProfile> {
    if repeats == 0 {
        return Err(Error::InvalidParams("repeats must be >= 1".into()));
    }
    let mut exact = Vec::with_capacity(pairs.len());
    let mut excluded_pairs = Vec::new();
    for (i, q) in pairs.iter().enumerate() {
        let e = exact_conn_between(g, &q.sources, &q.context, p)?;
        if e == 0.0 {
            excluded_pairs.push(i);
        } else {
            exact.push((i, e));
        }
    }
    let mut rows = Vec::new();
    for &theta in theta_grid {
        for mode in [WalkMode::Pruned, WalkMode::Unpruned] {
            let mut errors = Vec::with_capacity(exact.len() * repeats);
            for &(i, truth) in &exact {
                let q = &pairs[i];
                for r in 0..repeats {
                    let s = derive_seed(seed, &[&(i as u64).to_le_bytes(), &(r as u64).to_le_bytes()]);
                    let spec = SampleSpec { theta, seed: s, mode };
                    let est = estimate_conn_between(g, oracle, &q.sources, &q.context, p, spec)?;
                    errors.push((est.mean - truth).abs() / truth);
                }
            }
            rows.push(summarize(theta, mode, &errors));
        }
    }
    Ok(ErrorProfile { rows, excluded_pairs })
}

fn summarize(theta: usize, mode: WalkMode, errors: &[f64]) -> ErrorRow {
    let n = errors.len();
    if n == 0 {
        return ErrorRow { theta, mode, mean_relative_error: 0.0, ci95: 0.0, samples: 0 };
    }
    let mean = errors.iter().sum::<f64>() / n as f64;
    let ci95 = if n > 1 {
        let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1) as f64;
        1.96 * (var / n as f64).sqrt()
    } else {
        0.0
    };
    ErrorRow { theta, mode, mean_relative_error: mean, ci95, samples: n }
}
