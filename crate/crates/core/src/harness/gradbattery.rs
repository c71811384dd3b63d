use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arms::{ranking_loss_and_grad, ShapingModel, TrajectorySegment};
use crate::diffcore::grad_check;
use crate::gridworld::N_ACTIONS;
use crate::marl::{ppo_loss, ppo_loss_and_grads, Backbone, MinibatchData, PolicyModel, PpoConfig};
use crate::Real;

/// Worst relative errors between analytic and central-finite-difference
/// gradients over randomized instances of every trained loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradBatteryReport {
    pub instances_per_loss: usize,
    pub epsilon: Real,
    pub ranking_max_rel_err: Real,
    pub surrogate_max_rel_err: Real,
    pub value_max_rel_err: Real,
}

impl GradBatteryReport {
    pub fn max_rel_err(&self) -> Real {
        self.ranking_max_rel_err
            .max(self.surrogate_max_rel_err)
            .max(self.value_max_rel_err)
    }

    pub fn passes(&self, threshold: Real) -> bool {
        self.max_rel_err() < threshold
    }
}

impl fmt::Display for GradBatteryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "gradient check over {} instances per loss (epsilon = {:e})",
            self.instances_per_loss, self.epsilon
        )?;
        writeln!(f, "  ranking loss   max rel err = {:.3e}", self.ranking_max_rel_err)?;
        writeln!(f, "  ppo surrogate  max rel err = {:.3e}", self.surrogate_max_rel_err)?;
        write!(f, "  value loss     max rel err = {:.3e}", self.value_max_rel_err)
    }
}

const OBS_DIM: usize = 6;
const SEGMENT_LEN: usize = 4;
const ROWS: usize = 16;

fn random_segment(rng: &mut ChaCha8Rng, sparse: Real) -> TrajectorySegment {
    TrajectorySegment {
        agent_id: 0,
        start_timestep: 0,
        observations: (0..SEGMENT_LEN)
            .map(|_| (0..OBS_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
        actions: (0..SEGMENT_LEN).map(|_| rng.gen_range(0..N_ACTIONS)).collect(),
        sparse_return: sparse,
        dense_return: 0.0,
    }
}

fn check_ranking(instance: u64, epsilon: Real) -> Real {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive_indexed(instance, "gc-rank", 0));
    let model = ShapingModel::new(OBS_DIM, &[6], 0.1, instance).unwrap();
    let segs: Vec<TrajectorySegment> = (0..4)
        .map(|i| random_segment(&mut rng, 0.01 * i as Real))
        .collect();
    let pairs = vec![(&segs[0], &segs[1]), (&segs[2], &segs[3]), (&segs[1], &segs[2])];
    let (_, grad, _) = ranking_loss_and_grad(&model, &pairs, 0.97).unwrap();
    grad_check(
        &model.params,
        &grad,
        |p| {
            let probe = ShapingModel {
                spec: model.spec.clone(),
                params: p.clone(),
                scale: model.scale,
            };
            ranking_loss_and_grad(&probe, &pairs, 0.97).unwrap().0
        },
        epsilon,
    )
}

/// Builds a synthetic minibatch with ratios kept away from the clip
/// boundary, where the surrogate is not differentiable.
fn synthetic_minibatch(
    policy: &PolicyModel,
    config: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> MinibatchData {
    let critic_dim = policy.critic_input_dim();
    let mut data = MinibatchData {
        n: ROWS,
        obs: Vec::with_capacity(ROWS * OBS_DIM),
        critic_inputs: Vec::with_capacity(ROWS * critic_dim),
        actions: Vec::with_capacity(ROWS),
        behavior_log_probs: Vec::with_capacity(ROWS),
        advantages: Vec::with_capacity(ROWS),
        return_targets: Vec::with_capacity(ROWS),
    };
    for _ in 0..ROWS {
        let obs: Vec<Real> = (0..OBS_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let action = rng.gen_range(0..N_ACTIONS);
        let lp = crate::marl::action_log_probs(policy, &obs).unwrap()[action];
        let behavior = loop {
            let b = lp + rng.gen_range(-0.25..0.25);
            let ratio = (lp - b).exp();
            let eps = config.clip_ratio;
            if (ratio - (1.0 - eps)).abs() > 1e-3 && (ratio - (1.0 + eps)).abs() > 1e-3 {
                break b;
            }
        };
        let advantage = loop {
            let a: Real = rng.gen_range(-2.0..2.0);
            if a.abs() > 0.05 {
                break a;
            }
        };
        data.obs.extend_from_slice(&obs);
        for k in 0..critic_dim {
            data.critic_inputs.push(obs[k % OBS_DIM] * 0.5 + 0.1 * k as Real / critic_dim as Real);
        }
        data.actions.push(action);
        data.behavior_log_probs.push(behavior);
        data.advantages.push(advantage);
        data.return_targets.push(rng.gen_range(-1.0..1.0));
    }
    data
}

/// Worst relative errors of the actor (surrogate + entropy) and critic
/// (value) gradients on one random instance.
fn check_ppo(instance: u64, epsilon: Real) -> (Real, Real) {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive_indexed(instance, "gc-ppo", 1));
    let backbone = if instance % 2 == 0 { Backbone::Ippo } else { Backbone::Mappo };
    let policy = PolicyModel::new(backbone, OBS_DIM, 2, &[6], instance.wrapping_add(13)).unwrap();
    let config = PpoConfig {
        entropy_coef: 0.1,
        ..PpoConfig::default()
    };
    let data = synthetic_minibatch(&policy, &config, &mut rng);
    let (_, actor_grad, critic_grad) = ppo_loss_and_grads(&policy, &data, &config).unwrap();

    let actor_err = grad_check(
        &policy.actor,
        &actor_grad,
        |p| {
            let mut probe = policy.clone();
            probe.actor = p.clone();
            ppo_loss(&probe, &data, &config).unwrap()
        },
        epsilon,
    );
    let critic_err = grad_check(
        &policy.critic,
        &critic_grad,
        |p| {
            let mut probe = policy.clone();
            probe.critic = p.clone();
            ppo_loss(&probe, &data, &config).unwrap()
        },
        epsilon,
    );
    (actor_err, critic_err)
}

/// Runs the full battery: `instances_per_loss` randomized gradient checks
/// for the ranking loss, the clipped surrogate (with entropy term), and
/// the value loss.
pub fn run_grad_battery(instances_per_loss: usize, epsilon: Real, seed: u64) -> GradBatteryReport {
    let mut report = GradBatteryReport {
        instances_per_loss,
        epsilon,
        ranking_max_rel_err: 0.0,
        surrogate_max_rel_err: 0.0,
        value_max_rel_err: 0.0,
    };
    for i in 0..instances_per_loss as u64 {
        let instance = crate::seed::derive_indexed(seed, "grad-battery", i);
        report.ranking_max_rel_err = report.ranking_max_rel_err.max(check_ranking(instance, epsilon));
        let (actor_err, critic_err) = check_ppo(instance, epsilon);
        report.surrogate_max_rel_err = report.surrogate_max_rel_err.max(actor_err);
        report.value_max_rel_err = report.value_max_rel_err.max(critic_err);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_battery_passes_the_threshold() {
        let report = run_grad_battery(10, 1e-5, 42);
        assert!(report.passes(1e-4), "{report}");
    }
}
