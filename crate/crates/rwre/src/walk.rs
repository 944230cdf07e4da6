//! Step-by-step simulation of the biased walk, excursion by excursion.
//!
//! The walk lives on the tree plus a virtual parent of the root; from the
//! virtual parent it moves back to the root with probability one, which closes
//! an excursion. The ledger records, per vertex `x`, the number `N_x` of
//! traversals of the oriented edge `(parent(x), x)` and the number `E_x` of
//! excursions with at least one such traversal.

use crate::environment::{EnvError, EnvTree, VertexId};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("walk exceeded generation cap {cap}; replica flagged invalid")]
    GenCapExceeded { cap: u32 },
    #[error("walk exceeded step budget {budget}")]
    StepBudget { budget: u64 },
}

/// How the walk treats depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthPolicy {
    /// Reflect at `0`: from a vertex in that generation the walk moves to its
    /// parent with probability one.
    ///
    /// Excursions of the free walk below a vertex return to that vertex
    /// without touching any shallower edge, so reflection leaves the joint law
    /// of every ledger quantity at generations `<= depth` unchanged. It is the
    /// exact fast path whenever only observables up to a known generation are
    /// needed. Recorded traces do differ from the free walk below the
    /// reflection generation.
    Reflect(u32),
    /// Free walk; stepping into generation `cap + 1` aborts the replica with
    /// [`SimError::GenCapExceeded`]. Flagged replicas must be counted by the
    /// caller, never silently truncated.
    FlagAt(u32),
}

#[derive(Debug, Clone)]
pub struct WalkConfig {
    pub depth: DepthPolicy,
    /// Record the generation of every step (`-1` for the virtual root parent).
    /// Off by default: the walk takes order `n^2` steps for `n` excursions.
    pub record_trace: bool,
    pub step_budget: u64,
}

impl WalkConfig {
    pub fn reflected(depth: u32) -> Self {
        Self {
            depth: DepthPolicy::Reflect(depth),
            record_trace: false,
            step_budget: u64::MAX,
        }
    }

    pub fn flagged(cap: u32) -> Self {
        Self {
            depth: DepthPolicy::FlagAt(cap),
            record_trace: false,
            step_budget: u64::MAX,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

/// Edge local times of one simulation, from either backend.
#[derive(Debug, Clone)]
pub struct Ledger {
    n: Vec<u32>,
    visits: Vec<u32>,
    visit_mark: Vec<u32>,
    /// Completed excursion count `p`.
    pub excursions: u32,
    /// Whether `E_x` is populated (walk backend only).
    pub tracks_visits: bool,
}

/// Per-generation observables. `l = z_k + z_{k+1}` by the exact local-time
/// identity, never re-counted from a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observables {
    pub r: u64,
    pub z: u64,
    pub l: u64,
}

impl Ledger {
    pub(crate) fn new(tracks_visits: bool) -> Self {
        Self {
            n: Vec::new(),
            visits: Vec::new(),
            visit_mark: Vec::new(),
            excursions: 0,
            tracks_visits,
        }
    }

    #[inline]
    fn ensure_len(&mut self, len: usize) {
        if self.n.len() < len {
            self.n.resize(len, 0);
            if self.tracks_visits {
                self.visits.resize(len, 0);
                self.visit_mark.resize(len, 0);
            }
        }
    }

    #[inline]
    fn record_crossing(&mut self, x: VertexId, excursion: u32) {
        self.ensure_len(x.index() + 1);
        self.n[x.index()] += 1;
        if self.tracks_visits && self.visit_mark[x.index()] != excursion {
            self.visit_mark[x.index()] = excursion;
            self.visits[x.index()] += 1;
        }
    }

    #[inline]
    pub(crate) fn set_n(&mut self, x: VertexId, count: u32) {
        self.ensure_len(x.index() + 1);
        self.n[x.index()] = count;
    }

    /// Crossings `N_x` of the incoming edge of `x`.
    #[inline]
    pub fn n_of(&self, x: VertexId) -> u32 {
        self.n.get(x.index()).copied().unwrap_or(0)
    }

    /// Number of excursions that traversed the incoming edge of `x`.
    #[inline]
    pub fn e_of(&self, x: VertexId) -> u32 {
        self.visits.get(x.index()).copied().unwrap_or(0)
    }

    /// Vertices of generation `k` visited by the walk.
    pub fn range_at(&self, tree: &EnvTree, k: u32) -> Vec<VertexId> {
        (0..self.n.len().min(tree.len()))
            .map(VertexId::from_usize)
            .filter(|&x| tree.depth(x) == k && self.n_of(x) >= 1)
            .collect()
    }

    pub fn observables(&self, tree: &EnvTree, k: u32) -> Observables {
        let (mut r, mut z, mut z_next) = (0u64, 0u64, 0u64);
        for idx in 0..self.n.len().min(tree.len()) {
            let x = VertexId::from_usize(idx);
            let n = self.n[idx] as u64;
            if n == 0 {
                continue;
            }
            let d = tree.depth(x);
            if d == k {
                r += 1;
                z += n;
            } else if d == k + 1 {
                z_next += n;
            }
        }
        Observables {
            r,
            z,
            l: z + z_next,
        }
    }

    /// Fraction of visited vertices at generation `>= gamma` seen by two or
    /// more excursions, together with the raw counts. Diagnostic only: the
    /// rate at which this decays in `gamma` is reported, not asserted against
    /// a constant.
    pub fn multi_visit_diagnostic(&self, tree: &EnvTree, gamma: u32) -> MultiVisitDiagnostic {
        assert!(
            self.tracks_visits,
            "excursion visits not tracked by this backend"
        );
        let mut range_vertices = 0u64;
        let mut multi_visited = 0u64;
        for idx in 0..self.n.len().min(tree.len()) {
            let x = VertexId::from_usize(idx);
            if self.n[idx] >= 1 && tree.depth(x) >= gamma {
                range_vertices += 1;
                if self.visits[idx] >= 2 {
                    multi_visited += 1;
                }
            }
        }
        MultiVisitDiagnostic {
            gamma,
            range_vertices,
            multi_visited,
        }
    }

    /// Exact per-path identities shared by both backends. Returns the first
    /// violation as text; used by tests and the acceptance suite.
    pub fn check_invariants(&self, tree: &EnvTree) -> Result<(), String> {
        if self.n_of(tree.root()) != self.excursions {
            return Err(format!(
                "root edge count {} != excursion count {}",
                self.n_of(tree.root()),
                self.excursions
            ));
        }
        for idx in 0..self.n.len().min(tree.len()) {
            let x = VertexId::from_usize(idx);
            let n = self.n_of(x);
            if let Some(parent) = tree.parent(x) {
                if n >= 1 && self.n_of(parent) == 0 {
                    return Err(format!("vertex {idx} visited but its parent is not"));
                }
            }
            if self.tracks_visits {
                let e = self.e_of(x);
                if e > n || e > self.excursions {
                    return Err(format!(
                        "vertex {idx}: visit count {e} exceeds min(N = {n}, p = {})",
                        self.excursions
                    ));
                }
                if n >= 1 && e == 0 {
                    return Err(format!(
                        "vertex {idx} has crossings but no recorded excursion"
                    ));
                }
            }
        }
        // R_k <= Z_k and zero propagation along generations.
        let max_depth = (0..self.n.len().min(tree.len()))
            .map(VertexId::from_usize)
            .filter(|&x| self.n_of(x) >= 1)
            .map(|x| tree.depth(x))
            .max()
            .unwrap_or(0);
        let mut seen_empty = false;
        for k in 0..=max_depth {
            let obs = self.observables(tree, k);
            if obs.r > obs.z {
                return Err(format!("generation {k}: R = {} > Z = {}", obs.r, obs.z));
            }
            if seen_empty && obs.r > 0 {
                return Err(format!(
                    "generation {k} non-empty after an empty generation"
                ));
            }
            if obs.r == 0 {
                seen_empty = true;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MultiVisitDiagnostic {
    pub gamma: u32,
    pub range_vertices: u64,
    pub multi_visited: u64,
}

impl MultiVisitDiagnostic {
    pub fn fraction(&self) -> f64 {
        if self.range_vertices == 0 {
            0.0
        } else {
            self.multi_visited as f64 / self.range_vertices as f64
        }
    }

    /// True when some vertex at generation `>= gamma` was visited by two or
    /// more excursions, i.e. the single-excursion reduction fails here.
    pub fn reduction_fails(&self) -> bool {
        self.multi_visited > 0
    }
}

/// Result of a walk simulation.
#[derive(Debug, Clone)]
pub struct WalkRun {
    pub ledger: Ledger,
    /// Generations `|X_j|` for `j = 0..=steps`, with `-1` for the virtual
    /// parent of the root. Present only when requested.
    pub trace: Option<Vec<i32>>,
    /// Total steps until the `n`-th excursion closed.
    pub steps: u64,
}

/// A neighbour of a vertex together with its jump probability. The parent of
/// the root is the virtual vertex outside the tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Neighbor {
    Parent,
    Child(VertexId),
}

/// Quenched jump distribution at `x`: weight `e^{-V(x)}` towards the parent
/// and `e^{-V(child)}` towards each child, normalized.
pub fn transition_distribution(
    tree: &mut EnvTree,
    x: VertexId,
) -> Result<Vec<(Neighbor, f64)>, EnvError> {
    tree.materialize_children(x)?;
    let total = tree.weight_total(x);
    let mut out = vec![(Neighbor::Parent, tree.exp_neg_potential(x) / total)];
    if let Some(children) = tree.children(x) {
        for c in children {
            out.push((Neighbor::Child(c), tree.exp_neg_potential(c) / total));
        }
    }
    Ok(out)
}

/// Hitting probability `alpha_x = e^{-V(x)} / H_x` of the edge into `x` during
/// one excursion, and the success parameter `beta_x = 1 / H_x` of the
/// geometric crossing law conditional on hitting. Undefined at the root, whose
/// edge is crossed exactly once per excursion.
pub fn alpha_beta(tree: &EnvTree, x: VertexId) -> Result<(f64, f64), EnvError> {
    if x == tree.root() {
        return Err(EnvError::BadParameter(
            "alpha/beta undefined at the root".into(),
        ));
    }
    let h = tree.h_value(x);
    Ok(((-tree.potential(x)).exp() / h, 1.0 / h))
}

#[inline]
fn sample_step<R: Rng + ?Sized>(tree: &EnvTree, x: VertexId, rng: &mut R) -> Neighbor {
    let total = tree.weight_total(x);
    let mut u = rng.gen::<f64>() * total;
    let own = tree.exp_neg_potential(x);
    if u < own {
        return Neighbor::Parent;
    }
    u -= own;
    let children = tree
        .children(x)
        .expect("children materialized before stepping");
    let mut last = None;
    for c in children {
        let w = tree.exp_neg_potential(c);
        if u < w {
            return Neighbor::Child(c);
        }
        u -= w;
        last = Some(c);
    }
    // Rounding pushed u past the last weight; the draw belongs to the final child
    // (or the parent for a childless vertex).
    last.map_or(Neighbor::Parent, Neighbor::Child)
}

/// Run exactly `n` excursions from the root and return the ledger.
///
/// Under [`DepthPolicy::FlagAt`] a walk that steps past the cap aborts with an
/// error; under [`DepthPolicy::Reflect`] the ledger is exact for all
/// generations up to the reflection depth.
pub fn run_excursions<R: Rng + ?Sized>(
    tree: &mut EnvTree,
    n: u32,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<WalkRun, SimError> {
    assert!(n >= 1, "need at least one excursion");
    let mut ledger = Ledger::new(true);
    ledger.ensure_len(tree.len());
    let mut trace = cfg.record_trace.then(|| vec![0i32]);
    let mut steps = 0u64;
    let root = tree.root();
    for excursion in 1..=n {
        let mut pos = root;
        loop {
            steps += 1;
            if steps > cfg.step_budget {
                return Err(SimError::StepBudget {
                    budget: cfg.step_budget,
                });
            }
            let depth = tree.depth(pos);
            let step = match cfg.depth {
                DepthPolicy::Reflect(d) if depth >= d => Neighbor::Parent,
                _ => {
                    tree.materialize_children(pos)?;
                    ledger.ensure_len(tree.len());
                    sample_step(tree, pos, rng)
                }
            };
            match step {
                Neighbor::Parent => {
                    if pos == root {
                        // Down to the virtual parent and straight back: the
                        // return crossing closes the excursion.
                        steps += 1;
                        ledger.record_crossing(root, excursion);
                        if let Some(t) = trace.as_mut() {
                            t.push(-1);
                            t.push(0);
                        }
                        break;
                    }
                    pos = tree.parent(pos).expect("non-root vertex has a parent");
                    if let Some(t) = trace.as_mut() {
                        t.push(depth as i32 - 1);
                    }
                }
                Neighbor::Child(c) => {
                    if let DepthPolicy::FlagAt(cap) = cfg.depth {
                        if tree.depth(c) > cap {
                            return Err(SimError::GenCapExceeded { cap });
                        }
                    }
                    ledger.record_crossing(c, excursion);
                    pos = c;
                    if let Some(t) = trace.as_mut() {
                        t.push(depth as i32 + 1);
                    }
                }
            }
        }
    }
    ledger.excursions = n;
    Ok(WalkRun {
        ledger,
        trace,
        steps,
    })
}

/// Level occupation count from a recorded trace:
/// `sum_{j>=1} 1{|X_j| = k}`. Used to validate the local-time identity.
pub fn trace_level_count(trace: &[i32], k: u32) -> u64 {
    trace.iter().skip(1).filter(|&&g| g == k as i32).count() as u64
}
