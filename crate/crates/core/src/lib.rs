//! Multi-objective hyperparameter optimization with importance-driven
//! configuration-space reduction.
//!
//! The central piece is [`optimizer::run`], a ParEGO loop that, for each
//! scalarization, estimates Shapley-value tunability of every hyperparameter
//! on a random-forest surrogate and restricts the acquisition search to the
//! hyperparameters that carry most of the achievable improvement. Vanilla
//! ParEGO, random search and NSGA-II are provided as baselines, together with
//! ZDT test problems and the hypervolume-regret metrics used to compare them.

pub mod acquisition;
pub mod baselines;
pub mod benchmarks;
pub mod configspace;
pub mod error;
pub mod harness;
pub mod history;
pub mod hpi;
pub mod metrics;
pub mod optimizer;
pub mod report;
pub mod scalarization;
pub mod surrogate;

pub use error::{Error, Result};

/// Deterministic random stream used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate's rng from a seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
