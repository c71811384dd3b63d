//! Parameter-shared actor-critic backbones.
//!
//! One actor network drives every agent. The critic either scores each
//! agent's own observation (independent training, decentralized values) or
//! the fixed-order concatenation of all agents' observations (centralized
//! training); action selection never sees the critic, so execution is
//! decentralized in both cases. Updates use the clipped surrogate objective
//! with an entropy exploration bonus and generalized advantage estimation.

mod gae;
mod policy;
mod ppo;
mod rollout;

pub use gae::compute_gae;
pub use policy::{
    act, act_greedy, action_distribution, action_log_probs, centralized_value, value_of, Backbone,
    PolicyModel,
};
pub use ppo::{ppo_loss, ppo_loss_and_grads, ppo_update, MinibatchData, PpoOptimizer, PpoStats};
pub use rollout::{collect_rollouts, EnvPool, RewardSource, RolloutBatch};

use crate::diffcore::DiffError;
use crate::gridworld::GridError;
use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum MarlError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite value in {0}")]
    Numeric(String),
    #[error(transparent)]
    Env(#[from] GridError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Arms(#[from] crate::arms::ArmsError),
}

/// Hyperparameters of the policy-optimization backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub discount: Real,
    pub gae_lambda: Real,
    pub clip_ratio: Real,
    /// Entropy exploration coefficient (alpha).
    pub entropy_coef: Real,
    pub value_coef: Real,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub learning_rate: Real,
    /// Steps collected from each parallel environment per update.
    pub rollout_horizon: usize,
    pub n_parallel_envs: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            entropy_coef: 0.023,
            value_coef: 0.5,
            epochs: 2,
            minibatch_size: 256,
            learning_rate: 3e-4,
            rollout_horizon: 128,
            n_parallel_envs: 8,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(MarlError::InvalidInput(msg.to_string()))
            }
        };
        check((0.0..=1.0).contains(&self.discount), "discount must be in [0, 1]")?;
        check(
            (0.0..=1.0).contains(&self.gae_lambda),
            "gae_lambda must be in [0, 1]",
        )?;
        check(
            self.clip_ratio > 0.0 && self.clip_ratio < 1.0,
            "clip_ratio must be in (0, 1)",
        )?;
        check(self.entropy_coef >= 0.0, "entropy_coef must be >= 0")?;
        check(self.value_coef >= 0.0, "value_coef must be >= 0")?;
        check(self.epochs >= 1, "epochs must be >= 1")?;
        check(self.minibatch_size >= 1, "minibatch_size must be >= 1")?;
        check(self.learning_rate > 0.0, "learning_rate must be > 0")?;
        check(self.rollout_horizon >= 1, "rollout_horizon must be >= 1")?;
        check(self.n_parallel_envs >= 1, "n_parallel_envs must be >= 1")?;
        Ok(())
    }
}
