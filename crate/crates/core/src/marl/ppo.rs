use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{adam_step, mlp_backward, mlp_forward, AdamHyper};
use crate::{AdamState, Tensor};
use crate::gridworld::N_ACTIONS;
use crate::Real;

use super::policy::log_softmax;
use super::{MarlError, PolicyModel, PpoConfig, RolloutBatch};

/// Optimizer state for the two networks.
#[derive(Debug, Clone)]
pub struct PpoOptimizer {
    pub actor: AdamState,
    pub critic: AdamState,
}

impl PpoOptimizer {
    pub fn new(policy: &PolicyModel, learning_rate: Real) -> Self {
        Self {
            actor: AdamState::new(policy.actor.len(), AdamHyper::with_step_size(learning_rate)),
            critic: AdamState::new(policy.critic.len(), AdamHyper::with_step_size(learning_rate)),
        }
    }
}

/// Scalar diagnostics of one update, averaged over all minibatch passes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoStats {
    pub policy_loss: Real,
    pub value_loss: Real,
    pub entropy: Real,
    pub approx_kl: Real,
    pub clip_fraction: Real,
    pub total_loss: Real,
    pub minibatches: usize,
}

/// One minibatch of flattened rows for loss evaluation.
#[derive(Debug, Clone)]
pub struct MinibatchData {
    pub n: usize,
    pub obs: Vec<Real>,
    pub critic_inputs: Vec<Real>,
    pub actions: Vec<usize>,
    pub behavior_log_probs: Vec<Real>,
    pub advantages: Vec<Real>,
    pub return_targets: Vec<Real>,
}

impl MinibatchData {
    pub fn gather(batch: &RolloutBatch, indices: &[usize]) -> Self {
        let od = batch.obs_dim;
        let cd = batch.critic_dim;
        let mut out = Self {
            n: indices.len(),
            obs: Vec::with_capacity(indices.len() * od),
            critic_inputs: Vec::with_capacity(indices.len() * cd),
            actions: Vec::with_capacity(indices.len()),
            behavior_log_probs: Vec::with_capacity(indices.len()),
            advantages: Vec::with_capacity(indices.len()),
            return_targets: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            out.obs.extend_from_slice(&batch.obs[i * od..(i + 1) * od]);
            out.critic_inputs
                .extend_from_slice(&batch.critic_inputs[i * cd..(i + 1) * cd]);
            out.actions.push(batch.actions[i]);
            out.behavior_log_probs.push(batch.behavior_log_probs[i]);
            out.advantages.push(batch.advantages[i]);
            out.return_targets.push(batch.return_targets[i]);
        }
        out
    }
}

struct MinibatchEval {
    stats: PpoStats,
    actor_grad: Vec<Real>,
    critic_grad: Vec<Real>,
}

/// The clipped-surrogate objective with entropy bonus and value loss:
///
/// `L = mean(-min(ratio*A, clip(ratio)*A)) - alpha*mean(H) + c_v*mean((v - target)^2)`
///
/// together with its exact gradient with respect to both networks.
fn eval_minibatch(
    policy: &PolicyModel,
    data: &MinibatchData,
    config: &PpoConfig,
) -> Result<MinibatchEval, MarlError> {
    let n = data.n;
    if n == 0 {
        return Err(MarlError::InvalidInput("empty minibatch".into()));
    }
    let b = n as Real;
    let obs = Tensor::matrix(n, policy.obs_dim, data.obs.clone())?;
    let logits = mlp_forward(&policy.actor_spec, &policy.actor, &obs)?;
    let critic_in = Tensor::matrix(n, policy.critic_input_dim(), data.critic_inputs.clone())?;
    let values = mlp_forward(&policy.critic_spec, &policy.critic, &critic_in)?;

    let eps = config.clip_ratio;
    let alpha = config.entropy_coef;
    let mut policy_loss = 0.0;
    let mut entropy_sum = 0.0;
    let mut value_loss = 0.0;
    let mut kl_sum = 0.0;
    let mut clipped = 0usize;
    let mut actor_upstream = vec![0.0; n * N_ACTIONS];
    let mut critic_upstream = vec![0.0; n];

    for i in 0..n {
        let log_probs = log_softmax(logits.row(i))?;
        let probs: Vec<Real> = log_probs.iter().map(|lp| lp.exp()).collect();
        let action = data.actions[i];
        let adv = data.advantages[i];
        let ratio = (log_probs[action] - data.behavior_log_probs[i]).exp();

        let surr_unclipped = ratio * adv;
        let surr_clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        let surr = surr_unclipped.min(surr_clipped);
        policy_loss -= surr;
        // The clipped branch is constant in the parameters wherever it is
        // strictly active, so the gradient flows only through the
        // unclipped branch.
        let dsurr_dratio = if surr_unclipped <= surr_clipped { adv } else { 0.0 };
        if (ratio - 1.0).abs() > eps {
            clipped += 1;
        }

        let entropy: Real = -log_probs
            .iter()
            .zip(&probs)
            .map(|(lp, p)| p * lp)
            .sum::<Real>();
        entropy_sum += entropy;
        kl_sum += data.behavior_log_probs[i] - log_probs[action];

        for j in 0..N_ACTIONS {
            let indicator = if j == action { 1.0 } else { 0.0 };
            let dratio = ratio * (indicator - probs[j]);
            let dentropy = -probs[j] * (log_probs[j] + entropy);
            actor_upstream[i * N_ACTIONS + j] =
                (-dsurr_dratio * dratio - alpha * dentropy) / b;
        }

        let v = values.row(i)[0];
        let err = v - data.return_targets[i];
        value_loss += err * err;
        critic_upstream[i] = config.value_coef * 2.0 * err / b;
    }
    policy_loss /= b;
    value_loss /= b;
    let entropy = entropy_sum / b;
    let total_loss = policy_loss - alpha * entropy + config.value_coef * value_loss;
    if !total_loss.is_finite() {
        return Err(MarlError::Numeric("ppo loss".into()));
    }

    let (actor_grad, _) = mlp_backward(
        &policy.actor_spec,
        &policy.actor,
        &obs,
        &Tensor::matrix(n, N_ACTIONS, actor_upstream)?,
    )?;
    let (critic_grad, _) = mlp_backward(
        &policy.critic_spec,
        &policy.critic,
        &critic_in,
        &Tensor::matrix(n, 1, critic_upstream)?,
    )?;

    Ok(MinibatchEval {
        stats: PpoStats {
            policy_loss,
            value_loss,
            entropy,
            approx_kl: kl_sum / b,
            clip_fraction: clipped as Real / b,
            total_loss,
            minibatches: 1,
        },
        actor_grad: actor_grad.flat().to_vec(),
        critic_grad: critic_grad.flat().to_vec(),
    })
}

/// The scalar objective on one minibatch; used by the gradient checks.
pub fn ppo_loss(
    policy: &PolicyModel,
    data: &MinibatchData,
    config: &PpoConfig,
) -> Result<Real, MarlError> {
    Ok(eval_minibatch(policy, data, config)?.stats.total_loss)
}

/// Exact gradients of [`ppo_loss`] with respect to both networks.
pub fn ppo_loss_and_grads(
    policy: &PolicyModel,
    data: &MinibatchData,
    config: &PpoConfig,
) -> Result<(Real, Vec<Real>, Vec<Real>), MarlError> {
    let eval = eval_minibatch(policy, data, config)?;
    Ok((eval.stats.total_loss, eval.actor_grad, eval.critic_grad))
}

/// Runs `epochs` passes of shuffled minibatch updates over the batch.
/// A non-finite loss aborts the update and restores the incoming
/// parameters and optimizer state.
pub fn ppo_update(
    policy: &mut PolicyModel,
    opt: &mut PpoOptimizer,
    batch: &RolloutBatch,
    config: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PpoStats, MarlError> {
    config.validate()?;
    if batch.len() == 0 {
        return Err(MarlError::InvalidInput("empty rollout batch".into()));
    }
    let snapshot = (policy.actor.clone(), policy.critic.clone(), opt.actor.clone(), opt.critic.clone());

    let mut indices: Vec<usize> = (0..batch.len()).collect();
    let mut totals = PpoStats::default();
    let mut result = Ok(());
    'epochs: for _ in 0..config.epochs {
        // Fisher-Yates shuffle driven by the update rng.
        for i in (1..indices.len()).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        for chunk in indices.chunks(config.minibatch_size) {
            let data = MinibatchData::gather(batch, chunk);
            let eval = match eval_minibatch(policy, &data, config) {
                Ok(e) => e,
                Err(e) => {
                    result = Err(e);
                    break 'epochs;
                }
            };
            let actor_step = adam_step(policy.actor.flat(), &eval.actor_grad, &opt.actor);
            let critic_step = adam_step(policy.critic.flat(), &eval.critic_grad, &opt.critic);
            match (actor_step, critic_step) {
                (Ok((ap, a_state)), Ok((cp, c_state))) => {
                    policy.actor.flat_mut().copy_from_slice(&ap);
                    policy.critic.flat_mut().copy_from_slice(&cp);
                    opt.actor = a_state;
                    opt.critic = c_state;
                }
                (Err(e), _) | (_, Err(e)) => {
                    result = Err(e.into());
                    break 'epochs;
                }
            }
            totals.policy_loss += eval.stats.policy_loss;
            totals.value_loss += eval.stats.value_loss;
            totals.entropy += eval.stats.entropy;
            totals.approx_kl += eval.stats.approx_kl;
            totals.clip_fraction += eval.stats.clip_fraction;
            totals.total_loss += eval.stats.total_loss;
            totals.minibatches += 1;
        }
    }
    if let Err(e) = result {
        (policy.actor, policy.critic, opt.actor, opt.critic) = snapshot;
        return Err(e);
    }
    let m = totals.minibatches.max(1) as Real;
    totals.policy_loss /= m;
    totals.value_loss /= m;
    totals.entropy /= m;
    totals.approx_kl /= m;
    totals.clip_fraction /= m;
    totals.total_loss /= m;
    Ok(totals)
}
