use std::collections::BTreeSet;

use super::{game::TinyGame, TheoryError};
use crate::Real;

/// Finite-horizon backward-induction solution of a single-agent game:
/// `values[t][s]` and the exact argmax action sets `optimal_actions[t][s]`
/// (ties kept).
#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    pub values: Vec<Vec<Real>>,
    pub optimal_actions: Vec<Vec<BTreeSet<usize>>>,
}

/// Exact finite-horizon value iteration over a deterministic single-agent
/// game. The terminal value is zero. When `potential` is given, every
/// reward is augmented with the potential-based term
/// `discount * phi(s') - phi(s)`, where the potential of the episode's
/// terminal time is zero (the episodic shaping convention; see
/// [`value_iteration_shaped`]).
fn backward_induction(mdp: &TinyGame, potential: Option<&[Real]>) -> DpSolution {
    let n_actions = mdp.actions_per_agent[0];
    let mut values = vec![vec![0.0; mdp.n_states]; mdp.horizon + 1];
    let mut optimal_actions = vec![vec![BTreeSet::new(); mdp.n_states]; mdp.horizon];
    for t in (0..mdp.horizon).rev() {
        let last_step = t + 1 == mdp.horizon;
        for s in 0..mdp.n_states {
            let mut best = Real::NEG_INFINITY;
            let mut set = BTreeSet::new();
            for a in 0..n_actions {
                let idx = s * n_actions + a;
                let next = mdp.transition[idx];
                let mut r = mdp.reward[0][idx];
                if let Some(phi) = potential {
                    if !last_step {
                        r += mdp.discount * phi[next];
                    }
                    r -= phi[s];
                }
                let q = r + mdp.discount * values[t + 1][next];
                if q > best {
                    best = q;
                    set.clear();
                    set.insert(a);
                } else if q == best {
                    set.insert(a);
                }
            }
            values[t][s] = best;
            optimal_actions[t][s] = set;
        }
    }
    DpSolution {
        values,
        optimal_actions,
    }
}

fn require_single_agent(mdp: &TinyGame) -> Result<(), TheoryError> {
    mdp.validate()?;
    if mdp.n_agents != 1 {
        return Err(TheoryError::NotSingleAgent(mdp.n_agents));
    }
    Ok(())
}

/// Exact finite-horizon value iteration; returns argmax sets with ties kept.
pub fn value_iteration(mdp: &TinyGame) -> Result<DpSolution, TheoryError> {
    require_single_agent(mdp)?;
    Ok(backward_induction(mdp, None))
}

/// Value iteration with the potential-based shaping term added to every
/// reward.
///
/// At a fixed horizon the potential of the terminal time must be zero:
/// a time-uniform `discount * phi(s') - phi(s)` term is the same as paying
/// a terminal bonus `phi(s_H)`, which does change optimal actions. With
/// the terminal potential zeroed, every action value satisfies
/// `Q'(s,a) = Q(s,a) - phi(s)` exactly, so the argmax sets are identical.
pub fn value_iteration_shaped(
    mdp: &TinyGame,
    potential: &[Real],
) -> Result<DpSolution, TheoryError> {
    require_single_agent(mdp)?;
    if potential.len() != mdp.n_states {
        return Err(TheoryError::Structure(format!(
            "potential has {} entries for {} states",
            potential.len(),
            mdp.n_states
        )));
    }
    Ok(backward_induction(mdp, Some(potential)))
}

/// The same single-agent game with the time-uniform term
/// `discount * phi(s') - phi(s)` folded into the static reward table.
/// Useful for studying the terminal-bonus effect; the invariance oracle
/// uses [`value_iteration_shaped`] instead.
pub fn pbrs_shaped_mdp(mdp: &TinyGame, potential: &[Real]) -> Result<TinyGame, TheoryError> {
    require_single_agent(mdp)?;
    if potential.len() != mdp.n_states {
        return Err(TheoryError::Structure(format!(
            "potential has {} entries for {} states",
            potential.len(),
            mdp.n_states
        )));
    }
    let n_actions = mdp.actions_per_agent[0];
    let mut out = mdp.clone();
    for s in 0..mdp.n_states {
        for a in 0..n_actions {
            let idx = s * n_actions + a;
            let next = mdp.transition[idx];
            out.reward[0][idx] += mdp.discount * potential[next] - potential[s];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_mdp() -> TinyGame {
        // States 0..3 on a line; actions 0 = left, 1 = right; the only
        // reward is entering state 3.
        let n_states = 4;
        let n_actions = 2;
        let mut transition = vec![0; n_states * n_actions];
        let mut reward = vec![0.0; n_states * n_actions];
        for s in 0..n_states {
            transition[s * n_actions] = s.saturating_sub(1);
            let right = (s + 1).min(n_states - 1);
            transition[s * n_actions + 1] = right;
            if s == 2 {
                reward[s * n_actions + 1] = 1.0;
            }
        }
        TinyGame {
            n_agents: 1,
            n_states,
            actions_per_agent: vec![n_actions],
            transition,
            reward: vec![reward],
            return_maps: vec![None],
            horizon: 3,
            discount: 0.5,
            initial_state: 0,
        }
    }

    #[test]
    fn all_zero_rewards_make_every_action_optimal() {
        let mut mdp = chain_mdp();
        mdp.reward = vec![vec![0.0; 8]];
        let sol = value_iteration(&mdp).unwrap();
        for t in 0..mdp.horizon {
            for s in 0..mdp.n_states {
                assert_eq!(sol.optimal_actions[t][s], BTreeSet::from([0, 1]));
            }
        }
    }

    #[test]
    fn single_rewarding_transition_traces_the_shortest_path() {
        let mdp = chain_mdp();
        let sol = value_iteration(&mdp).unwrap();
        // From state 0 with horizon 3 the only way to collect the reward is
        // right, right, right.
        assert_eq!(sol.optimal_actions[0][0], BTreeSet::from([1]));
        assert_eq!(sol.optimal_actions[1][1], BTreeSet::from([1]));
        assert_eq!(sol.optimal_actions[2][2], BTreeSet::from([1]));
        assert!(sol.values[0][0] > 0.0);
    }

    #[test]
    fn potential_shaping_preserves_optimal_action_sets() {
        let mdp = chain_mdp();
        let base = value_iteration(&mdp).unwrap();
        // A dyadic potential keeps the arithmetic exact.
        let potential = vec![0.25, -0.5, 1.0, -0.25];
        let shaped = value_iteration_shaped(&mdp, &potential).unwrap();
        assert_eq!(base.optimal_actions, shaped.optimal_actions);
        // And the values differ from the base exactly by phi(s).
        for t in 0..mdp.horizon {
            for s in 0..mdp.n_states {
                assert_eq!(shaped.values[t][s], base.values[t][s] - potential[s]);
            }
        }
    }

    #[test]
    fn time_uniform_shaping_smuggles_in_a_terminal_bonus() {
        // Folding gamma*phi(s') - phi(s) into the static table pays phi at
        // the horizon too, which can change the argmax sets. This is why
        // the oracle zeroes the terminal potential.
        let mdp = chain_mdp();
        let base = value_iteration(&mdp).unwrap();
        let potential = vec![0.25, -0.5, 1.0, -0.25];
        let uniform = value_iteration(&pbrs_shaped_mdp(&mdp, &potential).unwrap()).unwrap();
        assert_ne!(base.optimal_actions, uniform.optimal_actions);
    }

    #[test]
    fn multi_agent_games_are_rejected() {
        let mut mdp = chain_mdp();
        mdp.n_agents = 2;
        mdp.actions_per_agent = vec![2, 1];
        mdp.reward.push(vec![0.0; 8]);
        mdp.return_maps.push(None);
        assert!(matches!(
            value_iteration(&mdp),
            Err(TheoryError::NotSingleAgent(2))
        ));
    }
}
