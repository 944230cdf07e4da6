//! Direct construction of the visited range as a multi-type Galton-Watson
//! tree, bypassing the step-by-step walk.
//!
//! Conditional on its incoming edge being crossed `k >= 1` times, the vector
//! of children edge counts follows a negative multinomial law: run a sequence
//! of categorical draws over the vertex's jump distribution and count, per
//! child, the outcomes landing on that child before the parent outcome occurs
//! for the `k`-th time. A vertex with `k = 0` has all-zero children. This
//! backend leaves excursion-visit counts unset.

use crate::environment::{EnvError, EnvTree, VertexId};
use crate::walk::{Ledger, SimError};
use rand::Rng;

/// Sample children edge counts for a vertex whose incoming edge was crossed
/// `k` times. `parent_weight` and `child_weights` are the unnormalized jump
/// weights (`e^{-V(x)}` and `e^{-V(child)}`); `out` receives one count per
/// child.
pub fn offspring_counts_sample<R: Rng + ?Sized>(
    rng: &mut R,
    k: u32,
    parent_weight: f64,
    child_weights: &[f64],
    out: &mut Vec<u32>,
) {
    out.clear();
    out.resize(child_weights.len(), 0);
    if k == 0 || child_weights.is_empty() {
        return;
    }
    let total = parent_weight + child_weights.iter().sum::<f64>();
    let mut remaining = k;
    loop {
        let mut u = rng.gen::<f64>() * total;
        if u < parent_weight {
            remaining -= 1;
            if remaining == 0 {
                return;
            }
            continue;
        }
        u -= parent_weight;
        let mut chosen = child_weights.len() - 1;
        for (i, &w) in child_weights.iter().enumerate() {
            if u < w {
                chosen = i;
                break;
            }
            u -= w;
        }
        out[chosen] += 1;
    }
}

/// Build the range ledger for `p` excursions down to `max_generation`,
/// breadth-first with pruning of zero-count vertices.
///
/// The construction is generation by generation, so stopping at
/// `max_generation` is exact for every shallower observable (no flagging is
/// involved); errors can only come from the vertex budget.
pub fn simulate_range<R: Rng + ?Sized>(
    tree: &mut EnvTree,
    p: u32,
    max_generation: u32,
    rng: &mut R,
) -> Result<Ledger, SimError> {
    assert!(p >= 1, "initial type must be positive");
    let mut ledger = Ledger::new(false);
    ledger.set_n(tree.root(), p);
    ledger.excursions = p;
    let mut frontier: Vec<(VertexId, u32)> = vec![(tree.root(), p)];
    let mut next: Vec<(VertexId, u32)> = Vec::new();
    let mut counts: Vec<u32> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for _gen in 0..max_generation {
        if frontier.is_empty() {
            break;
        }
        next.clear();
        for &(x, k) in &frontier {
            let (first, n_children) = tree.materialize_children(x)?;
            weights.clear();
            weights.extend(
                (first.0..first.0 + u32::from(n_children))
                    .map(|c| tree.exp_neg_potential(VertexId(c))),
            );
            offspring_counts_sample(rng, k, tree.exp_neg_potential(x), &weights, &mut counts);
            for (slot, &cnt) in counts.iter().enumerate() {
                if cnt > 0 {
                    let child = VertexId(first.0 + slot as u32);
                    ledger.set_n(child, cnt);
                    next.push((child, cnt));
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
    }
    Ok(ledger)
}

/// Closed-form quenched moments of single-excursion edge counts for a pair of
/// distinct vertices in the same generation.
#[derive(Debug, Clone, Copy)]
pub struct EdgeMoments {
    /// `E[(N_x)^2] = e^{-V(x)} (2 H_x - 1)`.
    pub second_moment_x: f64,
    /// `E[N_x N_y] = 2 H_{x^y} e^{V(x^y)} e^{-V(x)} e^{-V(y)}`.
    pub product_xy: f64,
    /// `E[N_x 1{N_y >= 1}]` with the `(1 + H_{y_{l+1},y} / H_y)` prefactor.
    pub x_times_hit_y: f64,
}

/// Evaluate the closed forms above on a fixed environment. Requires
/// `|x| = |y| >= 1` and `x != y`; the sibling case (`|x ^ y| = |x| - 1`) is
/// covered by the same expression with `H_{y,y} = 1`.
pub fn quenched_edge_moments(
    tree: &EnvTree,
    x: VertexId,
    y: VertexId,
) -> Result<EdgeMoments, EnvError> {
    let k = tree.depth(x);
    if k == 0 || tree.depth(y) != k {
        return Err(EnvError::BadParameter(
            "edge moments need two distinct non-root vertices of equal generation".into(),
        ));
    }
    if x == y {
        return Err(EnvError::BadParameter("vertices must be distinct".into()));
    }
    let anc = tree.lca(x, y);
    let ell = tree.depth(anc);
    let h_x = tree.h_value(x);
    let h_y = tree.h_value(y);
    let e_x = (-tree.potential(x)).exp();
    let e_y = (-tree.potential(y)).exp();
    let h_anc = tree.h_value(anc);
    let e_anc = tree.potential(anc).exp();
    let y_next = tree.ancestor_at(y, ell + 1);
    let h_between = tree.conductance_h(y_next, y)?;
    Ok(EdgeMoments {
        second_moment_x: e_x * (2.0 * h_x - 1.0),
        product_xy: 2.0 * h_anc * e_anc * e_x * e_y,
        x_times_hit_y: (1.0 + h_between / h_y) * h_anc * e_anc * e_x * e_y / h_y,
    })
}
