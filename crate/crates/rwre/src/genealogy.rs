//! Uniform pair sampling in a target generation of the simulated range,
//! most-recent-common-ancestor depths, and the coalescence-probability
//! estimators with their confidence intervals.

use crate::environment::{EnvFamily, EnvTree, VertexId};
use crate::range_gw::simulate_range;
use crate::rng::{purpose, StreamKey};
use crate::stats::{wilson_interval, StreamMoments};
use crate::walk::{run_excursions, Ledger, SimError, WalkConfig};
use rand::Rng;
use rayon::prelude::*;
use std::collections::HashMap;

/// A uniformly sampled ordered pair from one generation of the range.
#[derive(Debug, Clone, Copy)]
pub struct PairSample {
    pub x: VertexId,
    pub y: VertexId,
    pub lca_depth: u32,
    pub generation: u32,
}

/// Two independent uniform draws, with replacement (the diagonal pair `x = x`
/// is allowed), from the visited vertices of generation `k`. `None` signals an
/// empty generation, i.e. a conditioning rejection.
pub fn sample_pair<R: Rng + ?Sized>(
    tree: &EnvTree,
    ledger: &Ledger,
    k: u32,
    rng: &mut R,
) -> Option<PairSample> {
    let range = ledger.range_at(tree, k);
    if range.is_empty() {
        return None;
    }
    let x = range[rng.gen_range(0..range.len())];
    let y = range[rng.gen_range(0..range.len())];
    Some(PairSample {
        x,
        y,
        lca_depth: lca_depth(tree, x, y),
        generation: k,
    })
}

/// Generation of the deepest common ancestor.
pub fn lca_depth(tree: &EnvTree, x: VertexId, y: VertexId) -> u32 {
    tree.depth(tree.lca(x, y))
}

/// Range vertices of generation `k` grouped by their generation-`k'` ancestor.
#[derive(Debug, Clone)]
pub struct AncestorPartition {
    pub group_sizes: Vec<u64>,
    pub total: u64,
}

pub fn ancestor_partition(
    tree: &EnvTree,
    ledger: &Ledger,
    k: u32,
    k_prime: u32,
) -> AncestorPartition {
    assert!(k_prime <= k);
    let mut groups: HashMap<VertexId, u64> = HashMap::new();
    let mut total = 0u64;
    for x in ledger.range_at(tree, k) {
        *groups.entry(tree.ancestor_at(x, k_prime)).or_insert(0) += 1;
        total += 1;
    }
    let mut group_sizes: Vec<u64> = groups.into_values().collect();
    group_sizes.sort_unstable();
    AncestorPartition { group_sizes, total }
}

/// All-pairs coalescence ratio: the number of ordered generation-`k` pairs
/// sharing their generation-`k'` ancestor, divided by the squared generation
/// size. Shares its expectation with the tail indicator of a sampled pair.
pub fn c_ratio(tree: &EnvTree, ledger: &Ledger, k: u32, k_prime: u32) -> Option<f64> {
    let partition = ancestor_partition(tree, ledger, k, k_prime);
    if partition.total == 0 {
        return None;
    }
    let pairs: u64 = partition.group_sizes.iter().map(|&g| g * g).sum();
    Some(pairs as f64 / (partition.total * partition.total) as f64)
}

/// Which simulation backend produces the range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Step-by-step walk, generation-capped with flagging.
    Walk,
    /// Direct multi-type Galton-Watson construction down to the sampled
    /// generation (exact, no flagging).
    Gw,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Walk => "walk",
            Backend::Gw => "gw",
        }
    }
}

/// Settings for one coalescence replica.
#[derive(Debug, Clone, Copy)]
pub struct TrialSettings {
    pub family: EnvFamily,
    /// Excursion count (the initial type of the range tree).
    pub excursions: u32,
    /// Generation in which pairs are sampled.
    pub generation: u32,
    /// Walk-backend generation cap (flagging); ignored by the GW backend.
    pub gen_cap: u32,
    pub vertex_budget: usize,
    pub backend: Backend,
    /// Also compute the all-pairs ratio at this ancestor generation.
    pub c_ratio_threshold: Option<u32>,
}

/// Outcome of one replica: `None` fields encode the empty-generation
/// rejection.
#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub lca_depth: Option<u32>,
    pub range_size: u64,
    pub c_ratio: Option<f64>,
}

/// Run one replica: fresh environment, simulate to the sampled generation,
/// draw one pair.
pub fn pair_trial(settings: &TrialSettings, key: StreamKey) -> Result<TrialOutcome, SimError> {
    let mut tree = EnvTree::new(settings.family, key, settings.vertex_budget);
    let ledger = match settings.backend {
        Backend::Gw => {
            let mut rng = key.rng(purpose::RANGE);
            simulate_range(
                &mut tree,
                settings.excursions,
                settings.generation,
                &mut rng,
            )?
        }
        Backend::Walk => {
            let mut rng = key.rng(purpose::WALK);
            let cfg = WalkConfig::flagged(settings.gen_cap);
            run_excursions(&mut tree, settings.excursions, &cfg, &mut rng)?.ledger
        }
    };
    let mut rng = key.rng(purpose::PAIR);
    let pair = sample_pair(&tree, &ledger, settings.generation, &mut rng);
    let range_size = ledger.observables(&tree, settings.generation).r;
    let c_ratio_value = settings
        .c_ratio_threshold
        .and_then(|k_prime| c_ratio(&tree, &ledger, settings.generation, k_prime));
    Ok(TrialOutcome {
        lca_depth: pair.map(|p| p.lca_depth),
        range_size,
        c_ratio: c_ratio_value,
    })
}

/// One empirical probability row of a coalescence study.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdRow {
    pub threshold: u32,
    /// `true` for tail rows `P(lca >= threshold)`, `false` for head rows
    /// `P(lca < threshold)`.
    pub tail: bool,
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Aggregated coalescence estimates over independent replicas (one sampled
/// pair per replica).
#[derive(Debug, Clone)]
pub struct GenealogyEstimate {
    pub excursions: u32,
    pub generation: u32,
    pub accepted: u64,
    pub rejected: u64,
    pub flagged: u64,
    pub rows: Vec<ThresholdRow>,
    /// Mean and SE of the all-pairs ratio estimator, when requested.
    pub c_ratio_mean: Option<(f64, f64)>,
}

/// Minimum accepted replicas before any probability is reported.
pub const MIN_ACCEPTED: u64 = 100;

/// Replica farm for coalescence estimates. Tail thresholds report
/// `P(lca >= t | non-empty)`, head thresholds `P(lca < t | non-empty)`;
/// both use the same accepted replica set, so tail and head rows at one
/// threshold are exact complements.
pub fn coalescence_estimates(
    settings: &TrialSettings,
    tail_thresholds: &[u32],
    head_thresholds: &[u32],
    replicas: u64,
    seed: u64,
    z: f64,
) -> Result<GenealogyEstimate, SimError> {
    let outcomes: Vec<Result<Option<TrialOutcome>, SimError>> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let key = StreamKey::new(seed, replica);
            match pair_trial(settings, key) {
                Ok(out) => Ok(Some(out)),
                Err(SimError::GenCapExceeded { .. }) => Ok(None), // flagged, counted
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut lcas: Vec<u32> = Vec::new();
    let mut rejected = 0u64;
    let mut flagged = 0u64;
    let mut ratio_acc = StreamMoments::new();
    for outcome in outcomes {
        match outcome? {
            None => flagged += 1,
            Some(TrialOutcome {
                lca_depth: None, ..
            }) => rejected += 1,
            Some(TrialOutcome {
                lca_depth: Some(l),
                c_ratio,
                ..
            }) => {
                lcas.push(l);
                if let Some(r) = c_ratio {
                    ratio_acc.push(r);
                }
            }
        }
    }
    let accepted = lcas.len() as u64;
    if accepted < MIN_ACCEPTED {
        return Err(SimError::Env(crate::environment::EnvError::BadParameter(
            format!("only {accepted} accepted replicas (< {MIN_ACCEPTED}); refusing to report"),
        )));
    }
    let mut rows = Vec::new();
    for &t in tail_thresholds {
        let successes = lcas.iter().filter(|&&l| l >= t).count() as u64;
        let (ci_lo, ci_hi) = wilson_interval(successes, accepted, z);
        rows.push(ThresholdRow {
            threshold: t,
            tail: true,
            successes,
            trials: accepted,
            estimate: successes as f64 / accepted as f64,
            ci_lo,
            ci_hi,
        });
    }
    for &t in head_thresholds {
        let successes = lcas.iter().filter(|&&l| l < t).count() as u64;
        let (ci_lo, ci_hi) = wilson_interval(successes, accepted, z);
        rows.push(ThresholdRow {
            threshold: t,
            tail: false,
            successes,
            trials: accepted,
            estimate: successes as f64 / accepted as f64,
            ci_lo,
            ci_hi,
        });
    }
    let c_ratio_mean = (ratio_acc.count() > 1)
        .then(|| (ratio_acc.mean(), ratio_acc.se().unwrap_or(f64::INFINITY)));
    Ok(GenealogyEstimate {
        excursions: settings.excursions,
        generation: settings.generation,
        accepted,
        rejected,
        flagged,
        rows,
        c_ratio_mean,
    })
}
