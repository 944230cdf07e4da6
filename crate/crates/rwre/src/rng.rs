//! Reproducible stream seeding for parallel replica farms.
//!
//! One root seed drives the whole experiment. Each replica derives an
//! independent ChaCha stream from `(seed, replica)`, and every tree vertex
//! derives its offspring draw from `(stream, lineage key)`, so a tree
//! realization does not depend on the order in which the simulation touches
//! its vertices.

use rand::rngs::SmallRng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer; used to decorrelate seed material.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key identifying one replica's random stream within an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub replica: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replica: u64) -> Self {
        Self { seed, replica }
    }

    /// Stream material for a purpose-tagged substream (walker steps, range
    /// draws, pair sampling, ...). Distinct purposes never collide.
    pub fn substream(&self, purpose: u64) -> u64 {
        mix64(self.seed ^ mix64(self.replica ^ mix64(purpose)))
    }

    /// Long-period generator for a purpose-tagged substream.
    pub fn rng(&self, purpose: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(mix64(self.replica ^ mix64(purpose)));
        rng
    }
}

/// Purpose tags for substreams. Kept in one place so streams never alias.
pub mod purpose {
    pub const TREE: u64 = 1;
    pub const WALK: u64 = 2;
    pub const RANGE: u64 = 3;
    pub const PAIR: u64 = 4;
    pub const LIMIT: u64 = 5;
    pub const POOL: u64 = 6;
}

/// Cheap per-vertex generator keyed by the vertex's lineage. Used only for
/// offspring draws, where traversal-order independence matters.
#[inline]
pub fn vertex_rng(tree_stream: u64, lineage: u64) -> SmallRng {
    SmallRng::seed_from_u64(mix64(tree_stream ^ lineage))
}

/// Lineage key of the `slot`-th child of a vertex with key `parent`.
#[inline]
pub fn child_lineage(parent: u64, slot: u32) -> u64 {
    mix64(parent ^ (u64::from(slot) + 1).wrapping_mul(0xa076_1d64_78bd_642f))
}
