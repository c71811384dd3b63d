use rand_chacha::ChaCha8Rng;

use crate::arms::{pbrs_reward, shaped_reward, PbrsShaper, ShapingBank, TrajectorySegment};
use crate::gridworld::{
    Action, Cell, GridMap, SparsifierState, WorldState,
};
use crate::seed;
use crate::Real;

use super::{act, centralized_value, compute_gae, value_of, Backbone, MarlError, PolicyModel, PpoConfig};

/// Where the training reward comes from during collection. The dense and
/// sparse environment rewards are always recorded alongside, for reporting
/// and for segment labeling respectively.
#[derive(Debug, Clone, Copy)]
pub enum RewardSource<'a> {
    /// The sparse (delay-accumulated) environment reward itself.
    Sparse,
    /// Sparse reward plus the potential-based term.
    Pbrs(&'a PbrsShaper),
    /// The learned per-action reward alone (replacement shaping).
    Arms(&'a ShapingBank),
}

/// A set of parallel environment instances stepped in lockstep, with one
/// reward sparsifier per environment. Environments reset to fresh episodes
/// (same map, re-randomized starts and goals) when they hit `t_max`.
#[derive(Debug, Clone)]
pub struct EnvPool {
    map: GridMap,
    worlds: Vec<WorldState>,
    sparsifiers: Vec<SparsifierState>,
    /// Current flattened observation per environment per agent.
    obs: Vec<Vec<Vec<Real>>>,
    episode_index: Vec<u64>,
    base_seed: u64,
    pub n_agents: usize,
    pub fov_radius: usize,
    pub t_max: usize,
    pub reward_delay: usize,
    pub segment_len: usize,
    pub total_env_steps: u64,
}

impl EnvPool {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        map: GridMap,
        n_envs: usize,
        n_agents: usize,
        fov_radius: usize,
        t_max: usize,
        reward_delay: usize,
        segment_len: usize,
        base_seed: u64,
    ) -> Result<Self, MarlError> {
        if n_envs == 0 {
            return Err(MarlError::InvalidInput("need at least one environment".into()));
        }
        let mut pool = Self {
            map,
            worlds: Vec::with_capacity(n_envs),
            sparsifiers: Vec::with_capacity(n_envs),
            obs: vec![Vec::new(); n_envs],
            episode_index: vec![0; n_envs],
            base_seed,
            n_agents,
            fov_radius,
            t_max,
            reward_delay,
            segment_len,
            total_env_steps: 0,
        };
        for e in 0..n_envs {
            let (world, obs) = WorldState::reset(
                &pool.map,
                n_agents,
                fov_radius,
                t_max,
                pool.episode_seed(e, 0),
            )?;
            pool.worlds.push(world);
            pool.sparsifiers
                .push(SparsifierState::new(n_agents, reward_delay)?);
            pool.obs[e] = obs.iter().map(|o| o.flatten()).collect();
        }
        Ok(pool)
    }

    fn episode_seed(&self, env: usize, episode: u64) -> u64 {
        seed::derive_indexed(self.base_seed, "episode", (env as u64) << 40 | episode)
    }

    pub fn n_envs(&self) -> usize {
        self.worlds.len()
    }

    pub fn obs_dim(&self) -> usize {
        2 * (2 * self.fov_radius + 1) * (2 * self.fov_radius + 1)
    }

    fn begin_new_episode(&mut self, env: usize) -> Result<(), MarlError> {
        self.episode_index[env] += 1;
        let (world, obs) = WorldState::reset(
            &self.map,
            self.n_agents,
            self.fov_radius,
            self.t_max,
            self.episode_seed(env, self.episode_index[env]),
        )?;
        self.worlds[env] = world;
        self.sparsifiers[env].reset();
        self.obs[env] = obs.iter().map(|o| o.flatten()).collect();
        Ok(())
    }

    fn joint_obs(&self, env: usize) -> Vec<Real> {
        let mut joint = Vec::with_capacity(self.n_agents * self.obs_dim());
        for a in 0..self.n_agents {
            joint.extend_from_slice(&self.obs[env][a]);
        }
        joint
    }
}

/// Flattened per-(env, agent, timestep) arrays from one collection pass.
/// Rows are laid out stream-major: `row = (env * n_agents + agent) * horizon + t`.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub n_agents: usize,
    pub horizon: usize,
    pub obs_dim: usize,
    pub critic_dim: usize,
    pub obs: Vec<Real>,
    pub critic_inputs: Vec<Real>,
    pub actions: Vec<usize>,
    pub behavior_log_probs: Vec<Real>,
    pub training_rewards: Vec<Real>,
    pub dense_rewards: Vec<Real>,
    pub sparse_rewards: Vec<Real>,
    pub values: Vec<Real>,
    pub dones: Vec<bool>,
    pub advantages: Vec<Real>,
    pub return_targets: Vec<Real>,
    pub goal_events: u64,
    pub collision_events: u64,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    #[inline]
    pub fn row_index(&self, env: usize, agent: usize, t: usize) -> usize {
        (env * self.n_agents + agent) * self.horizon + t
    }

    fn with_capacity(n_envs: usize, n_agents: usize, horizon: usize, obs_dim: usize, critic_dim: usize) -> Self {
        let rows = n_envs * n_agents * horizon;
        Self {
            n_envs,
            n_agents,
            horizon,
            obs_dim,
            critic_dim,
            obs: vec![0.0; rows * obs_dim],
            critic_inputs: vec![0.0; rows * critic_dim],
            actions: vec![0; rows],
            behavior_log_probs: vec![0.0; rows],
            training_rewards: vec![0.0; rows],
            dense_rewards: vec![0.0; rows],
            sparse_rewards: vec![0.0; rows],
            values: vec![0.0; rows],
            dones: vec![false; rows],
            advantages: vec![0.0; rows],
            return_targets: vec![0.0; rows],
            goal_events: 0,
            collision_events: 0,
        }
    }
}

/// Steps every environment `horizon` times under the current policy.
///
/// The training reward per step comes from `reward_source`; the dense and
/// sparse environment rewards are logged alongside. Per-agent trajectory
/// segments are cut on a fixed non-overlapping stride of `segment_len`
/// steps within the rollout; partial tails (including at episode ends) are
/// discarded. Advantages are computed with generalized advantage
/// estimation and standardized over the whole batch.
pub fn collect_rollouts(
    pool: &mut EnvPool,
    policy: &PolicyModel,
    reward_source: RewardSource<'_>,
    horizon: usize,
    config: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(RolloutBatch, Vec<TrajectorySegment>), MarlError> {
    let n_envs = pool.n_envs();
    let n_agents = pool.n_agents;
    let obs_dim = pool.obs_dim();
    if policy.obs_dim != obs_dim {
        return Err(MarlError::InvalidInput(format!(
            "policy expects {}-dim observations, environment produces {obs_dim}",
            policy.obs_dim
        )));
    }
    let critic_dim = policy.critic_input_dim();
    let mut batch = RolloutBatch::with_capacity(n_envs, n_agents, horizon, obs_dim, critic_dim);
    let mut segments = Vec::new();
    // Per-(env, agent) accumulator of (obs, action, sparse, dense) steps.
    let mut seg_acc: Vec<Vec<Vec<(Vec<Real>, usize, Real, Real)>>> =
        vec![vec![Vec::with_capacity(pool.segment_len); n_agents]; n_envs];
    let mut seg_start: Vec<Vec<usize>> = vec![vec![0; n_agents]; n_envs];

    let mut actions_buf = vec![Action::Stay; n_agents];
    for t in 0..horizon {
        for e in 0..n_envs {
            // Centralized critics score the pre-step joint observation once
            // per environment step; every agent shares that estimate.
            let env_value = match policy.backbone {
                Backbone::Mappo => Some(centralized_value(policy, &pool.joint_obs(e))?),
                Backbone::Ippo => None,
            };
            let mut log_probs = vec![0.0; n_agents];
            for a in 0..n_agents {
                let (action, lp) = act(policy, &pool.obs[e][a], rng)?;
                actions_buf[a] = Action::from_index(action)?;
                log_probs[a] = lp;
            }
            let before: Vec<(Cell, Cell)> = pool.worlds[e]
                .agents
                .iter()
                .map(|ag| (ag.position, ag.goal))
                .collect();
            let in_episode_t = pool.worlds[e].timestep;
            let (next_obs, outcome) = pool.worlds[e].step(&actions_buf)?;
            let episode_end = pool.worlds[e].timestep == pool.t_max;

            batch.goal_events += outcome.goal_reached_flag.iter().filter(|g| **g).count() as u64;
            batch.collision_events += outcome.collision_flag.iter().filter(|c| **c).count() as u64;

            for a in 0..n_agents {
                let dense = outcome.dense_reward[a];
                let sparse = pool.sparsifiers[e].reveal(a, dense, in_episode_t, episode_end);
                let action = actions_buf[a].index();
                let training = match reward_source {
                    RewardSource::Sparse => sparse,
                    RewardSource::Pbrs(shaper) => {
                        // The potential is evaluated against the goal held
                        // before the step, so a goal reached this step has
                        // potential zero rather than jumping to the fresh
                        // goal's distance.
                        let after = (pool.worlds[e].agents[a].position, before[a].1);
                        pbrs_reward(sparse, before[a], after, shaper)
                    }
                    RewardSource::Arms(bank) => {
                        shaped_reward(bank.model_for(a), &pool.obs[e][a], action)?
                    }
                };

                let row = batch.row_index(e, a, t);
                batch.obs[row * obs_dim..(row + 1) * obs_dim].copy_from_slice(&pool.obs[e][a]);
                batch.actions[row] = action;
                batch.behavior_log_probs[row] = log_probs[a];
                batch.training_rewards[row] = training;
                batch.dense_rewards[row] = dense;
                batch.sparse_rewards[row] = sparse;
                batch.values[row] = match env_value {
                    Some(v) => v,
                    None => value_of(policy, &pool.obs[e][a])?,
                };
                batch.dones[row] = episode_end;

                if seg_acc[e][a].is_empty() {
                    seg_start[e][a] = in_episode_t;
                }
                seg_acc[e][a].push((pool.obs[e][a].clone(), action, sparse, dense));
                if seg_acc[e][a].len() == pool.segment_len {
                    segments.push(TrajectorySegment::from_steps(
                        a,
                        seg_start[e][a],
                        std::mem::take(&mut seg_acc[e][a]),
                        config.discount,
                    ));
                }
            }
            // Critic inputs are shared per (env, t) for the joint critic.
            for a in 0..n_agents {
                let row = batch.row_index(e, a, t);
                match policy.backbone {
                    Backbone::Ippo => {
                        batch.critic_inputs[row * critic_dim..(row + 1) * critic_dim]
                            .copy_from_slice(&pool.obs[e][a]);
                    }
                    Backbone::Mappo => {
                        batch.critic_inputs[row * critic_dim..(row + 1) * critic_dim]
                            .copy_from_slice(&pool.joint_obs(e));
                    }
                }
            }

            pool.obs[e] = next_obs.iter().map(|o| o.flatten()).collect();
            pool.total_env_steps += 1;
            if episode_end {
                for a in 0..n_agents {
                    seg_acc[e][a].clear();
                }
                pool.begin_new_episode(e)?;
            }
        }
    }

    // Bootstrap values for unfinished streams, then per-stream advantage
    // estimation and batch-wide standardization.
    if horizon > 0 {
        for e in 0..n_envs {
            let env_bootstrap = match policy.backbone {
                Backbone::Mappo => Some(centralized_value(policy, &pool.joint_obs(e))?),
                Backbone::Ippo => None,
            };
            for a in 0..n_agents {
                let start = batch.row_index(e, a, 0);
                let end = start + horizon;
                let bootstrap = if batch.dones[end - 1] {
                    0.0
                } else {
                    match env_bootstrap {
                        Some(v) => v,
                        None => value_of(policy, &pool.obs[e][a])?,
                    }
                };
                let (adv, ret) = compute_gae(
                    &batch.training_rewards[start..end],
                    &batch.values[start..end],
                    &batch.dones[start..end],
                    bootstrap,
                    config.discount,
                    config.gae_lambda,
                );
                batch.advantages[start..end].copy_from_slice(&adv);
                batch.return_targets[start..end].copy_from_slice(&ret);
            }
        }
        standardize(&mut batch.advantages);
    }
    Ok((batch, segments))
}

/// Zero-mean unit-variance normalization, guarded against zero variance.
fn standardize(xs: &mut [Real]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as Real;
    let mean = xs.iter().sum::<Real>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<Real>() / n;
    let std = var.sqrt().max(1e-8);
    for x in xs {
        *x = (*x - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::generate_random_map;
    use rand::SeedableRng;

    fn small_pool(delay: usize, seed: u64) -> EnvPool {
        let map = generate_random_map(6, 6, 0.1, 3).unwrap();
        EnvPool::new(map, 2, 2, 2, 16, delay, 4, seed).unwrap()
    }

    fn policy_for(pool: &EnvPool, backbone: Backbone) -> PolicyModel {
        PolicyModel::new(backbone, pool.obs_dim(), pool.n_agents, &[8], 5).unwrap()
    }

    #[test]
    fn zero_horizon_gives_empty_batch_and_no_segments() {
        let mut pool = small_pool(1, 0);
        let policy = policy_for(&pool, Backbone::Ippo);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (batch, segments) =
            collect_rollouts(&mut pool, &policy, RewardSource::Sparse, 0, &PpoConfig::default(), &mut rng)
                .unwrap();
        assert!(batch.is_empty());
        assert!(segments.is_empty());
    }

    #[test]
    fn batch_shape_and_segment_count() {
        let mut pool = small_pool(1, 1);
        let policy = policy_for(&pool, Backbone::Ippo);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let horizon = 8;
        let (batch, segments) = collect_rollouts(
            &mut pool,
            &policy,
            RewardSource::Sparse,
            horizon,
            &PpoConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(batch.len(), 2 * 2 * horizon);
        // Horizon 8 with segment length 4 cuts two segments per stream.
        assert_eq!(segments.len(), 2 * 2 * 2);
        assert!(segments.iter().all(|s| s.len() == 4));
    }

    #[test]
    fn delay_one_training_reward_equals_dense_reward() {
        let mut pool = small_pool(1, 2);
        let policy = policy_for(&pool, Backbone::Ippo);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (batch, _) = collect_rollouts(
            &mut pool,
            &policy,
            RewardSource::Sparse,
            12,
            &PpoConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(batch.training_rewards, batch.dense_rewards);
    }

    #[test]
    fn collection_is_deterministic() {
        let cfg = PpoConfig::default();
        let run = || {
            let mut pool = small_pool(3, 4);
            let policy = policy_for(&pool, Backbone::Mappo);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            collect_rollouts(&mut pool, &policy, RewardSource::Sparse, 10, &cfg, &mut rng).unwrap()
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a.obs, b.obs);
        assert_eq!(a.actions, b.actions);
        assert_eq!(a.advantages, b.advantages);
        assert_eq!(sa, sb);
    }

    #[test]
    fn advantages_are_standardized() {
        let mut pool = small_pool(2, 5);
        let policy = policy_for(&pool, Backbone::Ippo);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (batch, _) = collect_rollouts(
            &mut pool,
            &policy,
            RewardSource::Sparse,
            16,
            &PpoConfig::default(),
            &mut rng,
        )
        .unwrap();
        let n = batch.advantages.len() as Real;
        let mean: Real = batch.advantages.iter().sum::<Real>() / n;
        let var: Real = batch.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<Real>() / n;
        assert!(mean.abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-6 || var < 1e-12);
    }
}
