//! Brute-force verification of equilibrium invariance on tiny games.
//!
//! Two reward functions that order every pair of trajectories identically
//! induce the same best responses for an agent against fixed opponents, and
//! therefore the same pure Nash equilibria. This module checks that claim
//! exhaustively on small deterministic Markov games: policies are pure and
//! time-indexed, returns are computed by exact rollout, and best-response
//! and Nash sets are compared as exact sets before and after an
//! order-preserving reward transform. A dynamic-programming check does the
//! same for potential-based shaping on single-agent problems.
//!
//! Random generators draw rewards, discounts, and potentials from small
//! dyadic values (multiples of 1/8 and discounts in {1, 1/2}) so every
//! return is computed exactly in 64-bit floats and set comparisons carry no
//! tolerance at all.

mod dp;
mod game;
mod invariance;
mod random;
mod transform;

pub use dp::{pbrs_shaped_mdp, value_iteration, value_iteration_shaped, DpSolution};
pub use game::{
    enumerate_profiles, profile_count, return_of, return_of_refs, return_of_tables, PolicyTable,
    Profile, TinyGame,
};
pub use invariance::{
    best_responses, check_invariance, check_invariance_against, pure_nash_set, InvarianceReport,
    Witness,
};
pub use random::{random_game, random_mdp, random_potential, GameSizeBounds};
pub use transform::{
    apply_return_map_unchecked, apply_transform, realized_returns, OrderTransform, ReturnMap,
};

/// Default ceiling on the number of pure policy profiles a game may have
/// before exhaustive enumeration refuses to run.
pub const DEFAULT_PROFILE_BOUND: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TheoryError {
    #[error("profile space too large: {count} profiles exceeds bound {bound}")]
    Size { count: u128, bound: u128 },
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid game: {0}")]
    Structure(String),
    #[error("operation requires a single-agent game, got {0} agents")]
    NotSingleAgent(usize),
}
