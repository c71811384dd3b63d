use std::collections::BTreeSet;
use std::fmt;

use super::game::{enumerate_profiles, return_of_refs, PolicyTable, Profile, TinyGame};
use super::{TheoryError, DEFAULT_PROFILE_BOUND};
use crate::Real;

/// Every decoded policy of every agent, indexed `[agent][policy_id]`.
fn decode_all(game: &TinyGame) -> Vec<Vec<PolicyTable>> {
    (0..game.n_agents)
        .map(|i| {
            (0..game.n_policies(i))
                .map(|id| game.decode_policy(i, id))
                .collect()
        })
        .collect()
}

/// Deterministic iterator over the policy ids of all agents except `agent`,
/// presented as a full profile with `agent`'s slot fixed at 0.
fn opponent_profiles(game: &TinyGame, agent: usize) -> impl Iterator<Item = Profile> {
    let limits: Vec<u64> = (0..game.n_agents)
        .map(|i| if i == agent { 1 } else { game.n_policies(i) })
        .collect();
    let mut current: Option<Profile> = Some(vec![0; limits.len()]);
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let next = current.as_mut().unwrap();
        let mut carry = true;
        for (slot, &limit) in next.iter_mut().zip(&limits) {
            if !carry {
                break;
            }
            *slot += 1;
            if *slot == limit {
                *slot = 0;
            } else {
                carry = false;
            }
        }
        if carry {
            current = None;
        }
        Some(out)
    })
}

fn best_response_with(
    game: &TinyGame,
    agent: usize,
    opponents: &Profile,
    decoded: &[Vec<PolicyTable>],
) -> BTreeSet<u64> {
    let mut tables: Vec<&PolicyTable> = opponents
        .iter()
        .enumerate()
        .map(|(i, &id)| &decoded[i][id as usize])
        .collect();
    let mut best = Real::NEG_INFINITY;
    let mut set = BTreeSet::new();
    for own in 0..game.n_policies(agent) {
        tables[agent] = &decoded[agent][own as usize];
        let ret = return_of_refs(game, &tables, agent);
        if ret > best {
            best = ret;
            set.clear();
            set.insert(own);
        } else if ret == best {
            set.insert(own);
        }
    }
    set
}

/// The exact argmax set of `agent`'s policies against the fixed opponent
/// policies in `opponents` (the entry at `agent`'s own index is ignored).
/// Ties are kept: this is a set.
pub fn best_responses(game: &TinyGame, agent: usize, opponents: &Profile) -> BTreeSet<u64> {
    let decoded = decode_all(game);
    best_response_with(game, agent, opponents, &decoded)
}

/// All pure Nash equilibria: profiles where every agent's policy lies in
/// its best-response set against the rest of the profile.
pub fn pure_nash_set(game: &TinyGame, bound: u128) -> Result<BTreeSet<Profile>, TheoryError> {
    let decoded = decode_all(game);
    // Best-response sets per agent, computed once per opponent combination
    // and keyed by the opponent profile (own slot zeroed).
    let mut br: Vec<std::collections::HashMap<Profile, BTreeSet<u64>>> =
        vec![std::collections::HashMap::new(); game.n_agents];
    for agent in 0..game.n_agents {
        for opp in opponent_profiles(game, agent) {
            let set = best_response_with(game, agent, &opp, &decoded);
            br[agent].insert(opp, set);
        }
    }
    let mut nash = BTreeSet::new();
    for profile in enumerate_profiles(game, bound)? {
        let stable = (0..game.n_agents).all(|agent| {
            let mut key = profile.clone();
            key[agent] = 0;
            br[agent][&key].contains(&profile[agent])
        });
        if stable {
            nash.insert(profile);
        }
    }
    Ok(nash)
}

/// First observed discrepancy between two games' solution structure.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    BestResponse {
        agent: usize,
        opponents: Profile,
        original: BTreeSet<u64>,
        transformed: BTreeSet<u64>,
    },
    Nash {
        original_only: Vec<Profile>,
        transformed_only: Vec<Profile>,
    },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::BestResponse {
                agent,
                opponents,
                original,
                transformed,
            } => write!(
                f,
                "best-response set of agent {agent} against {opponents:?} changed: \
                 {original:?} -> {transformed:?}"
            ),
            Witness::Nash {
                original_only,
                transformed_only,
            } => write!(
                f,
                "Nash set changed: lost {original_only:?}, gained {transformed_only:?}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub br_sets_equal: bool,
    pub nash_sets_equal: bool,
    pub witness: Option<Witness>,
}

impl InvarianceReport {
    pub fn invariant(&self) -> bool {
        self.br_sets_equal && self.nash_sets_equal
    }
}

/// Compares per-agent best-response sets (for every agent against every
/// opponent profile) and the full pure Nash sets of two games that share
/// everything except their reward structure. The first discrepancy, if
/// any, is reported as a witness.
pub fn check_invariance_against(
    original: &TinyGame,
    transformed: &TinyGame,
) -> Result<InvarianceReport, TheoryError> {
    original.validate()?;
    transformed.validate()?;
    let same_shape = original.n_agents == transformed.n_agents
        && original.n_states == transformed.n_states
        && original.actions_per_agent == transformed.actions_per_agent
        && original.transition == transformed.transition
        && original.horizon == transformed.horizon
        && original.discount == transformed.discount
        && original.initial_state == transformed.initial_state;
    if !same_shape {
        return Err(TheoryError::Structure(
            "games must share dynamics to compare their solution structure".into(),
        ));
    }

    let decoded = decode_all(original);
    let mut br_sets_equal = true;
    let mut witness = None;
    for agent in 0..original.n_agents {
        for opp in opponent_profiles(original, agent) {
            let before = best_response_with(original, agent, &opp, &decoded);
            let after = best_response_with(transformed, agent, &opp, &decoded);
            if before != after {
                br_sets_equal = false;
                witness.get_or_insert(Witness::BestResponse {
                    agent,
                    opponents: opp,
                    original: before,
                    transformed: after,
                });
                break;
            }
        }
        if !br_sets_equal {
            break;
        }
    }

    let nash_before = pure_nash_set(original, DEFAULT_PROFILE_BOUND)?;
    let nash_after = pure_nash_set(transformed, DEFAULT_PROFILE_BOUND)?;
    let nash_sets_equal = nash_before == nash_after;
    if !nash_sets_equal && witness.is_none() {
        witness = Some(Witness::Nash {
            original_only: nash_before.difference(&nash_after).cloned().collect(),
            transformed_only: nash_after.difference(&nash_before).cloned().collect(),
        });
    }
    Ok(InvarianceReport {
        br_sets_equal,
        nash_sets_equal,
        witness,
    })
}

/// Applies one optional transform per agent and compares solution
/// structure before and after.
pub fn check_invariance(
    game: &TinyGame,
    transforms: &[Option<super::OrderTransform>],
) -> Result<InvarianceReport, TheoryError> {
    if transforms.len() != game.n_agents {
        return Err(TheoryError::Structure(format!(
            "need one transform slot per agent, got {} for {} agents",
            transforms.len(),
            game.n_agents
        )));
    }
    let mut transformed = game.clone();
    for (agent, t) in transforms.iter().enumerate() {
        if let Some(t) = t {
            transformed = super::apply_transform(&transformed, agent, t)?;
        }
    }
    check_invariance_against(game, &transformed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{apply_return_map_unchecked, OrderTransform};

    /// Prisoner's dilemma: actions 0 = cooperate, 1 = defect;
    /// T=5 > R=3 > P=1 > S=0.
    fn prisoners_dilemma() -> TinyGame {
        let payoff = |mine: usize, theirs: usize| -> Real {
            match (mine, theirs) {
                (0, 0) => 3.0,
                (0, 1) => 0.0,
                (1, 0) => 5.0,
                (1, 1) => 1.0,
                _ => unreachable!(),
            }
        };
        // Joint index = a0 + 2 * a1.
        TinyGame {
            n_agents: 2,
            n_states: 1,
            actions_per_agent: vec![2, 2],
            transition: vec![0; 4],
            reward: vec![
                (0..4).map(|j| payoff(j % 2, j / 2)).collect(),
                (0..4).map(|j| payoff(j / 2, j % 2)).collect(),
            ],
            return_maps: vec![None, None],
            horizon: 1,
            discount: 1.0,
            initial_state: 0,
        }
    }

    /// Two-action coordination game with equal payoffs on both matches.
    fn coordination() -> TinyGame {
        let mut g = prisoners_dilemma();
        let coord = |j: usize| -> Real {
            if j % 2 == j / 2 {
                1.0
            } else {
                0.0
            }
        };
        g.reward = vec![(0..4).map(coord).collect(), (0..4).map(coord).collect()];
        g
    }

    #[test]
    fn defection_dominates_in_prisoners_dilemma() {
        let g = prisoners_dilemma();
        for opp in 0..2u64 {
            let set = best_responses(&g, 0, &vec![0, opp]);
            assert_eq!(set, BTreeSet::from([1]));
        }
        let nash = pure_nash_set(&g, 100).unwrap();
        assert_eq!(nash, BTreeSet::from([vec![1, 1]]));
    }

    #[test]
    fn coordination_game_has_both_matching_equilibria() {
        let nash = pure_nash_set(&coordination(), 100).unwrap();
        assert_eq!(nash, BTreeSet::from([vec![0, 0], vec![1, 1]]));
    }

    #[test]
    fn reward_independent_of_own_actions_makes_everything_optimal() {
        let mut g = prisoners_dilemma();
        // Agent 0's reward depends only on agent 1's action.
        g.reward[0] = (0..4).map(|j| (j / 2) as Real).collect();
        let set = best_responses(&g, 0, &vec![0, 1]);
        assert_eq!(set, BTreeSet::from([0, 1]));
    }

    #[test]
    fn nash_profiles_survive_a_deviation_scan() {
        // Independent stability oracle: directly compare each agent's
        // return against all unilateral deviations.
        let g = coordination();
        let nash = pure_nash_set(&g, 100).unwrap();
        for profile in enumerate_profiles(&g, 100).unwrap() {
            let mut stable = true;
            'outer: for agent in 0..g.n_agents {
                let base = super::super::return_of(&g, &profile, agent);
                for dev in 0..g.n_policies(agent) {
                    let mut alt = profile.clone();
                    alt[agent] = dev;
                    if super::super::return_of(&g, &alt, agent) > base {
                        stable = false;
                        break 'outer;
                    }
                }
            }
            assert_eq!(nash.contains(&profile), stable, "profile {profile:?}");
        }
    }

    #[test]
    fn identity_and_scale_transforms_preserve_structure() {
        let g = prisoners_dilemma();
        let report = check_invariance(&g, &[None, None]).unwrap();
        assert!(report.invariant());
        assert!(report.witness.is_none());

        let transforms = vec![
            Some(OrderTransform::Scale(3.0)),
            Some(OrderTransform::Scale(0.5)),
        ];
        let report = check_invariance(&g, &transforms).unwrap();
        assert!(report.invariant(), "witness: {:?}", report.witness);
    }

    #[test]
    fn order_breaking_map_is_witnessed() {
        // Single agent, two actions, returns 1 and 2. Negating the best
        // return flips the best response.
        let g = TinyGame {
            n_agents: 1,
            n_states: 1,
            actions_per_agent: vec![2],
            transition: vec![0, 0],
            reward: vec![vec![1.0, 2.0]],
            return_maps: vec![None],
            horizon: 1,
            discount: 1.0,
            initial_state: 0,
        };
        let broken = apply_return_map_unchecked(&g, 0, vec![(1.0, 1.0), (2.0, -2.0)]);
        let report = check_invariance_against(&g, &broken).unwrap();
        assert!(!report.invariant());
        match report.witness.expect("expected a witness") {
            Witness::BestResponse {
                agent,
                original,
                transformed,
                ..
            } => {
                assert_eq!(agent, 0);
                assert_eq!(original, BTreeSet::from([1]));
                assert_eq!(transformed, BTreeSet::from([0]));
            }
            w => panic!("unexpected witness {w}"),
        }
    }
}
