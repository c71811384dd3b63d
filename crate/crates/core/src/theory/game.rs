use crate::Real;

use super::{transform::ReturnMap, TheoryError};

/// A tiny deterministic Markov game with full observability.
///
/// Transitions and rewards are total tables over (state, joint action);
/// the successor state is determined, so rewards are indexed by the pair.
/// `return_maps` optionally post-process an agent's whole-trajectory return
/// (the realization of strictly-increasing return transforms, equivalent to
/// adjusting the final step's reward per trajectory class).
#[derive(Debug, Clone, PartialEq)]
pub struct TinyGame {
    pub n_agents: usize,
    pub n_states: usize,
    pub actions_per_agent: Vec<usize>,
    /// `transition[state * n_joint_actions + joint] -> next state`.
    pub transition: Vec<usize>,
    /// `reward[agent][state * n_joint_actions + joint]`.
    pub reward: Vec<Vec<Real>>,
    pub return_maps: Vec<Option<ReturnMap>>,
    pub horizon: usize,
    pub discount: Real,
    pub initial_state: usize,
}

/// One pure policy id per agent. A policy id encodes a deterministic map
/// `(state, timestep) -> action` as a base-`|A_i|` number with one digit
/// per `(t, s)` slot.
pub type Profile = Vec<u64>;

impl TinyGame {
    pub fn n_joint_actions(&self) -> usize {
        self.actions_per_agent.iter().product()
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        if self.n_agents == 0 || self.actions_per_agent.len() != self.n_agents {
            return Err(TheoryError::Structure("agent count mismatch".into()));
        }
        if self.n_states == 0 || self.horizon == 0 {
            return Err(TheoryError::Structure("empty state space or horizon".into()));
        }
        if self.initial_state >= self.n_states {
            return Err(TheoryError::Structure("initial state out of range".into()));
        }
        let table = self.n_states * self.n_joint_actions();
        if self.transition.len() != table || self.transition.iter().any(|&s| s >= self.n_states) {
            return Err(TheoryError::Structure("transition table not total".into()));
        }
        if self.reward.len() != self.n_agents || self.reward.iter().any(|r| r.len() != table) {
            return Err(TheoryError::Structure("reward table not total".into()));
        }
        if self.return_maps.len() != self.n_agents {
            return Err(TheoryError::Structure("return map list length mismatch".into()));
        }
        Ok(())
    }

    /// Number of pure time-indexed policies for one agent.
    pub fn n_policies(&self, agent: usize) -> u64 {
        let slots = (self.n_states * self.horizon) as u32;
        (self.actions_per_agent[agent] as u64)
            .checked_pow(slots)
            .expect("policy count overflow")
    }

    /// Mixed-radix joint action index from per-agent actions.
    pub fn joint_index(&self, actions: &[usize]) -> usize {
        let mut joint = 0;
        let mut stride = 1;
        for (a, &n) in actions.iter().zip(&self.actions_per_agent) {
            joint += a * stride;
            stride *= n;
        }
        joint
    }

    pub fn decode_policy(&self, agent: usize, policy_id: u64) -> PolicyTable {
        PolicyTable::decode(self, agent, policy_id)
    }
}

/// A decoded pure policy: `actions[t * n_states + s]` is the action taken
/// in state `s` at timestep `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTable {
    pub actions: Vec<u8>,
}

impl PolicyTable {
    pub fn decode(game: &TinyGame, agent: usize, mut policy_id: u64) -> Self {
        let base = game.actions_per_agent[agent] as u64;
        let slots = game.n_states * game.horizon;
        let mut actions = Vec::with_capacity(slots);
        for _ in 0..slots {
            actions.push((policy_id % base) as u8);
            policy_id /= base;
        }
        Self { actions }
    }

    #[inline]
    pub fn action(&self, n_states: usize, state: usize, t: usize) -> usize {
        self.actions[t * n_states + state] as usize
    }
}

/// Total number of pure policy profiles, `prod_i |A_i|^(|S| * H)`.
pub fn profile_count(game: &TinyGame) -> u128 {
    let slots = (game.n_states * game.horizon) as u32;
    game.actions_per_agent
        .iter()
        .map(|&a| (a as u128).pow(slots))
        .product()
}

/// Exhaustively enumerates every pure policy profile in a fixed
/// deterministic order (agent 0's policy id varies fastest).
pub fn enumerate_profiles(
    game: &TinyGame,
    bound: u128,
) -> Result<impl Iterator<Item = Profile>, TheoryError> {
    let count = profile_count(game);
    if count > bound {
        return Err(TheoryError::Size { count, bound });
    }
    let limits: Vec<u64> = (0..game.n_agents).map(|i| game.n_policies(i)).collect();
    let mut current: Option<Profile> = Some(vec![0; game.n_agents]);
    Ok(std::iter::from_fn(move || {
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
    }))
}

/// Exact rollout of the deterministic game from its initial state: the
/// discounted return of `agent` under the given decoded policy tables,
/// passed through the agent's return map when one is set.
pub fn return_of_tables(game: &TinyGame, tables: &[PolicyTable], agent: usize) -> Real {
    let refs: Vec<&PolicyTable> = tables.iter().collect();
    return_of_refs(game, &refs, agent)
}

/// [`return_of_tables`] over borrowed tables, for callers that reuse
/// pre-decoded policies.
pub fn return_of_refs(game: &TinyGame, tables: &[&PolicyTable], agent: usize) -> Real {
    let mut state = game.initial_state;
    let mut acc = 0.0;
    let mut disc = 1.0;
    let mut actions = vec![0usize; game.n_agents];
    for t in 0..game.horizon {
        for (i, table) in tables.iter().enumerate() {
            actions[i] = table.action(game.n_states, state, t);
        }
        let joint = game.joint_index(&actions);
        let idx = state * game.n_joint_actions() + joint;
        acc += disc * game.reward[agent][idx];
        disc *= game.discount;
        state = game.transition[idx];
    }
    match &game.return_maps[agent] {
        Some(map) => map.apply(acc),
        None => acc,
    }
}

/// [`return_of_tables`] with policies given by id.
pub fn return_of(game: &TinyGame, profile: &Profile, agent: usize) -> Real {
    let tables: Vec<PolicyTable> = profile
        .iter()
        .enumerate()
        .map(|(i, &id)| game.decode_policy(i, id))
        .collect();
    return_of_tables(game, &tables, agent)
}
