//! Monte Carlo laboratory for randomly biased random walks on Galton-Watson
//! trees.
//!
//! The crate simulates a nearest-neighbour walk on a rooted random tree whose
//! jump weights are `exp(-V(x))` for a branching-random-walk potential `V`,
//! records edge local times excursion by excursion, and estimates the limit
//! objects that govern the volume of the range and the coalescence structure of
//! vertex pairs sampled in generations proportional to the excursion count:
//! Feller-diffusion marginals, Polya-Aeppli cluster counts, exponential ratio
//! statistics and their series/integral expressions.
//!
//! Two interchangeable simulation backends are provided: a step-by-step walker
//! ([`walk`]) and a direct multi-type Galton-Watson construction of the range
//! ([`range_gw`]). Their agreement in law is part of the acceptance suite.

pub mod config;
pub mod environment;
pub mod genealogy;
pub mod limit_laws;
pub mod manytoone;
pub mod range_gw;
pub mod report;
pub mod rng;
pub mod stats;
pub mod walk;

pub use environment::{EnvFamily, EnvTree, RegimeReport, VertexId};
pub use walk::{DepthPolicy, Ledger, WalkConfig};
