use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::game::{profile_count, TinyGame};
use crate::Real;

/// Size limits for randomly drawn games.
#[derive(Debug, Clone, Copy)]
pub struct GameSizeBounds {
    pub max_agents: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub max_horizon: usize,
    /// Games are redrawn until their profile count fits this bound, keeping
    /// exhaustive checks fast.
    pub profile_bound: u128,
}

impl Default for GameSizeBounds {
    fn default() -> Self {
        Self {
            max_agents: 3,
            max_states: 4,
            max_actions: 3,
            max_horizon: 3,
            profile_bound: 20_000,
        }
    }
}

/// Rewards are multiples of 1/8 in [-2, 2] and discounts are 1 or 1/2, so
/// returns (and their scaled/shifted images) are exact in 64-bit floats and
/// argmax ties are meaningful.
fn dyadic_reward(rng: &mut ChaCha8Rng) -> Real {
    rng.gen_range(-16..=16i32) as Real / 8.0
}

/// Uniformly random deterministic game within `bounds`.
pub fn random_game(rng: &mut ChaCha8Rng, bounds: &GameSizeBounds) -> TinyGame {
    loop {
        let n_agents = rng.gen_range(1..=bounds.max_agents);
        let n_states = rng.gen_range(1..=bounds.max_states);
        let horizon = rng.gen_range(1..=bounds.max_horizon);
        let actions_per_agent: Vec<usize> = (0..n_agents)
            .map(|_| rng.gen_range(1..=bounds.max_actions))
            .collect();
        let n_joint: usize = actions_per_agent.iter().product();
        let table = n_states * n_joint;
        let game = TinyGame {
            n_agents,
            n_states,
            actions_per_agent,
            transition: (0..table).map(|_| rng.gen_range(0..n_states)).collect(),
            reward: (0..n_agents)
                .map(|_| (0..table).map(|_| dyadic_reward(rng)).collect())
                .collect(),
            return_maps: vec![None; n_agents],
            horizon,
            discount: if rng.gen_bool(0.5) { 1.0 } else { 0.5 },
            initial_state: rng.gen_range(0..n_states),
        };
        if profile_count(&game) <= bounds.profile_bound {
            return game;
        }
    }
}

/// Uniformly random deterministic single-agent problem for the dynamic
/// programming checks.
pub fn random_mdp(
    rng: &mut ChaCha8Rng,
    max_states: usize,
    max_actions: usize,
    max_horizon: usize,
) -> TinyGame {
    let n_states = rng.gen_range(2..=max_states.max(2));
    let n_actions = rng.gen_range(2..=max_actions.max(2));
    let horizon = rng.gen_range(1..=max_horizon);
    let table = n_states * n_actions;
    TinyGame {
        n_agents: 1,
        n_states,
        actions_per_agent: vec![n_actions],
        transition: (0..table).map(|_| rng.gen_range(0..n_states)).collect(),
        reward: vec![(0..table).map(|_| dyadic_reward(rng)).collect()],
        return_maps: vec![None],
        horizon,
        discount: if rng.gen_bool(0.5) { 1.0 } else { 0.5 },
        initial_state: rng.gen_range(0..n_states),
    }
}

/// Random dyadic potential function (multiples of 1/4 in [-2, 2]).
pub fn random_potential(rng: &mut ChaCha8Rng, n_states: usize) -> Vec<Real> {
    (0..n_states)
        .map(|_| rng.gen_range(-8..=8i32) as Real / 4.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn generated_games_validate_and_fit_bounds() {
        let bounds = GameSizeBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let g = random_game(&mut rng, &bounds);
            g.validate().unwrap();
            assert!(profile_count(&g) <= bounds.profile_bound);
            assert!(g.n_agents <= 3 && g.n_states <= 4 && g.horizon <= 3);
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let bounds = GameSizeBounds::default();
        let a = random_game(&mut ChaCha8Rng::seed_from_u64(7), &bounds);
        let b = random_game(&mut ChaCha8Rng::seed_from_u64(7), &bounds);
        assert_eq!(a, b);
    }
}
