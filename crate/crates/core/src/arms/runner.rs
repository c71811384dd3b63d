use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::AdamHyper;
use crate::AdamState;
use crate::gridworld::{GridMap, Observation};
use crate::harness::{MetricLog, MetricRecord, ShapingPhaseStats};
use crate::marl::{
    collect_rollouts, ppo_update, Backbone, EnvPool, MarlError, PolicyModel, PpoConfig,
    PpoOptimizer, RewardSource,
};
use crate::seed;
use crate::Real;

use super::{ranking_update_minibatched, PairBuffer, PbrsShaper, ShapingBank, ShapingModel};

/// Which training signal drives the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapingMode {
    /// The sparse environment reward itself.
    None,
    /// Sparse reward augmented with the potential-based term.
    Pbrs,
    /// The learned ranking-trained reward alone.
    Arms,
}

impl ShapingMode {
    pub fn name(self) -> &'static str {
        match self {
            ShapingMode::None => "none",
            ShapingMode::Pbrs => "pbrs",
            ShapingMode::Arms => "arms",
        }
    }
}

/// Reward-learning hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmsConfig {
    /// Trajectory segment length L.
    pub segment_len: usize,
    /// Ring-buffer capacity in segments.
    pub buffer_capacity: usize,
    /// Pairs sampled per shaping phase.
    pub pairs_per_phase: usize,
    /// Pairs per optimizer step within a shaping pass.
    pub ranking_minibatch: usize,
    pub reward_learning_rate: Real,
    /// Output scale: shaped rewards live in (-scale, +scale).
    pub reward_scale: Real,
    pub reward_hidden: Vec<usize>,
    /// Train one reward network per agent instead of a shared one.
    pub per_agent_theta: bool,
    /// Potential scale of the PBRS baseline.
    pub pbrs_potential_scale: Real,
}

impl Default for ArmsConfig {
    fn default() -> Self {
        Self {
            segment_len: 16,
            buffer_capacity: 16_384,
            pairs_per_phase: 8_192,
            ranking_minibatch: 64,
            reward_learning_rate: 1e-3,
            reward_scale: super::shaping::DEFAULT_REWARD_SCALE,
            reward_hidden: vec![64, 64],
            per_agent_theta: false,
            pbrs_potential_scale: super::pbrs::DEFAULT_POTENTIAL_SCALE,
        }
    }
}

impl ArmsConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        if self.segment_len == 0 {
            return Err(MarlError::InvalidInput("segment_len must be >= 1".into()));
        }
        if self.buffer_capacity < 2 {
            return Err(MarlError::InvalidInput("buffer_capacity must be >= 2".into()));
        }
        if self.ranking_minibatch == 0 {
            return Err(MarlError::InvalidInput("ranking_minibatch must be >= 1".into()));
        }
        if self.reward_scale <= 0.0 {
            return Err(MarlError::InvalidInput("reward_scale must be > 0".into()));
        }
        if self.reward_learning_rate <= 0.0 {
            return Err(MarlError::InvalidInput("reward_learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Environment parameters of one training run.
#[derive(Debug, Clone)]
pub struct EnvSetup {
    pub map: GridMap,
    pub n_agents: usize,
    pub fov_radius: usize,
    pub t_max: usize,
    pub reward_delay: usize,
}

/// Everything a finished run hands back.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub policy: PolicyModel,
    pub shaping: Option<ShapingBank>,
    pub log: MetricLog,
}

/// The full training loop: alternates a reinforcement-learning phase
/// (collect rollouts under the active reward source, update the policy)
/// with a reward-shaping phase (buffer segments, sample and label pairs,
/// update the reward network) until the agent-action budget is exhausted.
///
/// With the shaping mode set to `None` or `Pbrs` the shaping phase is
/// skipped entirely and the loop degenerates to the plain backbone.
#[allow(clippy::too_many_arguments)]
pub fn run_arms(
    env: &EnvSetup,
    backbone: Backbone,
    mode: ShapingMode,
    ppo: &PpoConfig,
    arms: &ArmsConfig,
    policy_hidden: &[usize],
    step_budget_agent_actions: u64,
    seed_base: u64,
) -> Result<RunArtifacts, MarlError> {
    ppo.validate()?;
    arms.validate()?;
    let obs_dim = Observation::flat_dim(env.fov_radius);
    let mut policy = PolicyModel::new(
        backbone,
        obs_dim,
        env.n_agents,
        policy_hidden,
        seed::derive(seed_base, "policy"),
    )?;
    let mut opt = PpoOptimizer::new(&policy, ppo.learning_rate);

    let mut shaping_bank = match mode {
        ShapingMode::Arms => {
            let n_models = if arms.per_agent_theta { env.n_agents } else { 1 };
            let models = (0..n_models)
                .map(|i| {
                    ShapingModel::new(
                        obs_dim,
                        &arms.reward_hidden,
                        arms.reward_scale,
                        seed::derive_indexed(seed_base, "shaping", i as u64),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(if arms.per_agent_theta {
                ShapingBank::per_agent(models)
            } else {
                ShapingBank::shared(models.into_iter().next().unwrap())
            })
        }
        _ => None,
    };
    let mut shaping_opts: Vec<AdamState> = shaping_bank
        .as_ref()
        .map(|bank| {
            bank.models()
                .iter()
                .map(|m| AdamState::new(m.params.len(), AdamHyper::with_step_size(arms.reward_learning_rate)))
                .collect()
        })
        .unwrap_or_default();
    let pbrs = PbrsShaper::new(ppo.discount, arms.pbrs_potential_scale);

    let mut pool = EnvPool::new(
        env.map.clone(),
        ppo.n_parallel_envs,
        env.n_agents,
        env.fov_radius,
        env.t_max,
        env.reward_delay,
        arms.segment_len,
        seed::derive(seed_base, "envs"),
    )?;
    let mut buffer = PairBuffer::new(arms.buffer_capacity, arms.segment_len);
    let mut rollout_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_base, "rollout"));
    let mut update_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_base, "ppo"));
    let mut pair_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_base, "pairs"));

    let mut log = MetricLog::new();
    let mut cumulative_dense = 0.0;
    let mut goals_total = 0u64;
    let mut collisions_total = 0u64;
    let mut update = 0u64;

    while pool.total_env_steps * (env.n_agents as u64) < step_budget_agent_actions {
        let (batch, segments) = {
            let source = match (&mode, &shaping_bank) {
                (ShapingMode::None, _) => RewardSource::Sparse,
                (ShapingMode::Pbrs, _) => RewardSource::Pbrs(&pbrs),
                (ShapingMode::Arms, Some(bank)) => RewardSource::Arms(bank),
                (ShapingMode::Arms, None) => unreachable!("arms mode always has a bank"),
            };
            collect_rollouts(&mut pool, &policy, source, ppo.rollout_horizon, ppo, &mut rollout_rng)?
        };
        let stats = ppo_update(&mut policy, &mut opt, &batch, ppo, &mut update_rng)?;

        let shaping_stats = if let Some(bank) = shaping_bank.as_mut() {
            buffer.store_segments(segments)?;
            run_shaping_phase(bank, &mut shaping_opts, &buffer, arms, ppo.discount, &mut pair_rng)?
        } else {
            None
        };

        let rows = batch.len().max(1) as Real;
        let dense_sum: Real = batch.dense_rewards.iter().sum();
        cumulative_dense += dense_sum / (batch.n_envs * batch.n_agents).max(1) as Real;
        goals_total += batch.goal_events;
        collisions_total += batch.collision_events;
        update += 1;
        log.push(MetricRecord {
            update,
            env_steps: pool.total_env_steps,
            agent_actions: pool.total_env_steps * env.n_agents as u64,
            mean_dense_reward: dense_sum / rows,
            cumulative_dense_reward: cumulative_dense,
            goals_reached: goals_total,
            collisions: collisions_total,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            approx_kl: stats.approx_kl,
            entropy_coef: ppo.entropy_coef,
            shaping: shaping_stats,
        });
    }

    Ok(RunArtifacts {
        policy,
        shaping: shaping_bank,
        log,
    })
}

/// One reward-shaping phase: sample pairs, drop ties, one optimizer pass
/// per model. With a shared model all pairs train it; with per-agent
/// models each agent's share of the pair budget is drawn from its own
/// segments (when it has at least two in the buffer).
fn run_shaping_phase(
    bank: &mut ShapingBank,
    opts: &mut [AdamState],
    buffer: &PairBuffer,
    arms: &ArmsConfig,
    discount: Real,
    pair_rng: &mut ChaCha8Rng,
) -> Result<Option<ShapingPhaseStats>, MarlError> {
    if buffer.len() < 2 {
        return Ok(None);
    }
    let mut totals = ShapingPhaseStats {
        buffer_size: buffer.len(),
        pairs_used: 0,
        pairs_skipped: 0,
        mean_loss: 0.0,
        accuracy: 0.0,
    };
    let mut phases = 0usize;
    if bank.is_shared() {
        let idx = buffer.sample_pairs(arms.pairs_per_phase, pair_rng)?;
        let pairs: Vec<_> = idx.iter().map(|&(a, b)| (buffer.get(a), buffer.get(b))).collect();
        let stats = ranking_update_minibatched(
            &mut bank.models_mut()[0],
            &mut opts[0],
            &pairs,
            discount,
            arms.ranking_minibatch,
        )?;
        totals.pairs_used += stats.pairs_used;
        totals.pairs_skipped += stats.pairs_skipped;
        if !stats.all_skipped {
            totals.mean_loss += stats.mean_loss;
            totals.accuracy += stats.accuracy;
            phases += 1;
        }
    } else {
        let n_models = bank.models().len();
        let share = (arms.pairs_per_phase / n_models).max(1);
        for agent in 0..n_models {
            let own: Vec<usize> = (0..buffer.len())
                .filter(|&i| buffer.get(i).agent_id == agent)
                .collect();
            if own.len() < 2 {
                continue;
            }
            let mut pairs = Vec::with_capacity(share);
            for _ in 0..share {
                let a = own[rand::Rng::gen_range(pair_rng, 0..own.len())];
                let b = loop {
                    let b = own[rand::Rng::gen_range(pair_rng, 0..own.len())];
                    if b != a {
                        break b;
                    }
                };
                pairs.push((buffer.get(a), buffer.get(b)));
            }
            let stats = ranking_update_minibatched(
                &mut bank.models_mut()[agent],
                &mut opts[agent],
                &pairs,
                discount,
                arms.ranking_minibatch,
            )?;
            totals.pairs_used += stats.pairs_used;
            totals.pairs_skipped += stats.pairs_skipped;
            if !stats.all_skipped {
                totals.mean_loss += stats.mean_loss;
                totals.accuracy += stats.accuracy;
                phases += 1;
            }
        }
    }
    if phases > 0 {
        totals.mean_loss /= phases as Real;
        totals.accuracy /= phases as Real;
    }
    Ok(Some(totals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::generate_random_map;

    fn tiny_setup() -> EnvSetup {
        EnvSetup {
            map: generate_random_map(6, 6, 0.1, 3).unwrap(),
            n_agents: 2,
            fov_radius: 2,
            t_max: 16,
            reward_delay: 4,
        }
    }

    fn tiny_ppo() -> PpoConfig {
        PpoConfig {
            rollout_horizon: 16,
            n_parallel_envs: 2,
            minibatch_size: 32,
            epochs: 1,
            ..PpoConfig::default()
        }
    }

    fn tiny_arms() -> ArmsConfig {
        ArmsConfig {
            segment_len: 4,
            buffer_capacity: 64,
            pairs_per_phase: 16,
            reward_hidden: vec![8],
            ..ArmsConfig::default()
        }
    }

    #[test]
    fn zero_budget_returns_initialized_models_and_empty_log() {
        let env = tiny_setup();
        let art = run_arms(
            &env,
            Backbone::Ippo,
            ShapingMode::Arms,
            &tiny_ppo(),
            &tiny_arms(),
            &[8],
            0,
            7,
        )
        .unwrap();
        assert!(art.log.records.is_empty());
        assert!(art.shaping.is_some());
    }

    #[test]
    fn sparse_mode_runs_without_a_shaping_bank() {
        let env = tiny_setup();
        let art = run_arms(
            &env,
            Backbone::Ippo,
            ShapingMode::None,
            &tiny_ppo(),
            &tiny_arms(),
            &[8],
            256,
            7,
        )
        .unwrap();
        assert!(art.shaping.is_none());
        assert!(!art.log.records.is_empty());
        assert!(art.log.records.iter().all(|r| r.shaping.is_none()));
    }

    #[test]
    fn arms_mode_trains_the_reward_network() {
        let env = tiny_setup();
        let art = run_arms(
            &env,
            Backbone::Mappo,
            ShapingMode::Arms,
            &tiny_ppo(),
            &tiny_arms(),
            &[8],
            512,
            9,
        )
        .unwrap();
        let bank = art.shaping.unwrap();
        assert!(bank.is_shared());
        assert!(art
            .log
            .records
            .iter()
            .any(|r| r.shaping.map(|s| s.buffer_size > 0).unwrap_or(false)));
    }

    #[test]
    fn runs_are_bit_identical_given_the_seed() {
        let env = tiny_setup();
        let go = || {
            run_arms(
                &env,
                Backbone::Ippo,
                ShapingMode::Arms,
                &tiny_ppo(),
                &tiny_arms(),
                &[8],
                384,
                11,
            )
            .unwrap()
        };
        let a = go();
        let b = go();
        assert_eq!(a.policy.actor.flat(), b.policy.actor.flat());
        assert_eq!(a.policy.critic.flat(), b.policy.critic.flat());
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn per_agent_theta_builds_one_model_per_agent() {
        let env = tiny_setup();
        let arms = ArmsConfig {
            per_agent_theta: true,
            ..tiny_arms()
        };
        let art = run_arms(
            &env,
            Backbone::Ippo,
            ShapingMode::Arms,
            &tiny_ppo(),
            &arms,
            &[8],
            256,
            13,
        )
        .unwrap();
        let bank = art.shaping.unwrap();
        assert!(!bank.is_shared());
        assert_eq!(bank.models().len(), env.n_agents);
    }
}
