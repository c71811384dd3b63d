use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{mlp_forward, Activation, MlpSpec};
use crate::ParamStore;
use crate::gridworld::N_ACTIONS;
use crate::seed;
use crate::{Real, Tensor};

use super::MarlError;

/// Which critic the backbone trains with. Action selection is identical
/// either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backbone {
    /// Independent training: the critic scores one agent's observation.
    Ippo,
    /// Centralized critic over the fixed-agent-order concatenation of all
    /// agents' observations; execution stays decentralized.
    Mappo,
}

impl Backbone {
    pub fn name(self) -> &'static str {
        match self {
            Backbone::Ippo => "ippo",
            Backbone::Mappo => "mappo",
        }
    }
}

/// Shared actor-critic parameters. One network serves every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub backbone: Backbone,
    pub n_agents: usize,
    pub obs_dim: usize,
    pub actor_spec: MlpSpec,
    pub actor: ParamStore,
    pub critic_spec: MlpSpec,
    pub critic: ParamStore,
}

impl PolicyModel {
    pub fn new(
        backbone: Backbone,
        obs_dim: usize,
        n_agents: usize,
        hidden: &[usize],
        seed_base: u64,
    ) -> Result<Self, MarlError> {
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(N_ACTIONS);
        let actor_spec = MlpSpec::new(actor_sizes, Activation::Silu, Activation::Identity)?;

        let critic_in = match backbone {
            Backbone::Ippo => obs_dim,
            Backbone::Mappo => obs_dim * n_agents,
        };
        let mut critic_sizes = vec![critic_in];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        let critic_spec = MlpSpec::new(critic_sizes, Activation::Silu, Activation::Identity)?;

        Ok(Self {
            backbone,
            n_agents,
            obs_dim,
            actor: ParamStore::init(&actor_spec, seed::derive(seed_base, "actor"))?,
            actor_spec,
            critic: ParamStore::init(&critic_spec, seed::derive(seed_base, "critic"))?,
            critic_spec,
        })
    }

    pub fn critic_input_dim(&self) -> usize {
        self.critic_spec.input_dim()
    }
}

/// Log-probabilities of all actions under the actor, via a numerically
/// stable log-softmax. Errors on non-finite logits.
pub fn action_log_probs(policy: &PolicyModel, obs: &[Real]) -> Result<Vec<Real>, MarlError> {
    let logits = mlp_forward(&policy.actor_spec, &policy.actor, &Tensor::vector(obs.to_vec())?)?;
    log_softmax(logits.data())
}

pub(crate) fn log_softmax(logits: &[Real]) -> Result<Vec<Real>, MarlError> {
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(MarlError::Numeric("actor logits".into()));
    }
    let m = logits.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
    let log_z = logits.iter().map(|l| (l - m).exp()).sum::<Real>().ln() + m;
    Ok(logits.iter().map(|l| l - log_z).collect())
}

/// Action probabilities under the actor.
pub fn action_distribution(policy: &PolicyModel, obs: &[Real]) -> Result<Vec<Real>, MarlError> {
    Ok(action_log_probs(policy, obs)?.iter().map(|lp| lp.exp()).collect())
}

/// Samples an action from the actor's softmax distribution. Deterministic
/// given the generator state.
pub fn act(
    policy: &PolicyModel,
    obs: &[Real],
    rng: &mut ChaCha8Rng,
) -> Result<(usize, Real), MarlError> {
    let log_probs = action_log_probs(policy, obs)?;
    let u: Real = rng.gen();
    let mut cum = 0.0;
    let mut action = log_probs.len() - 1;
    for (i, lp) in log_probs.iter().enumerate() {
        cum += lp.exp();
        if u < cum {
            action = i;
            break;
        }
    }
    Ok((action, log_probs[action]))
}

/// Highest-probability action, ties broken by the lowest index.
pub fn act_greedy(policy: &PolicyModel, obs: &[Real]) -> Result<(usize, Real), MarlError> {
    let log_probs = action_log_probs(policy, obs)?;
    let action = log_probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    Ok((action, log_probs[action]))
}

/// Decentralized value estimate of one agent's observation.
pub fn value_of(policy: &PolicyModel, obs: &[Real]) -> Result<Real, MarlError> {
    if policy.backbone != Backbone::Ippo {
        return Err(MarlError::InvalidInput(
            "per-observation values require the decentralized critic".into(),
        ));
    }
    critic_forward(policy, obs)
}

/// Centralized value of the joint observation: all agents' flattened
/// observations concatenated in fixed agent order. Training-only; action
/// selection never calls this.
pub fn centralized_value(policy: &PolicyModel, joint_obs: &[Real]) -> Result<Real, MarlError> {
    if policy.backbone != Backbone::Mappo {
        return Err(MarlError::InvalidInput(
            "centralized values require the centralized critic".into(),
        ));
    }
    critic_forward(policy, joint_obs)
}

fn critic_forward(policy: &PolicyModel, input: &[Real]) -> Result<Real, MarlError> {
    let out = mlp_forward(
        &policy.critic_spec,
        &policy.critic,
        &Tensor::vector(input.to_vec())?,
    )?;
    Ok(out.data()[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn uniform_policy(obs_dim: usize) -> PolicyModel {
        let mut p = PolicyModel::new(Backbone::Ippo, obs_dim, 1, &[4], 0).unwrap();
        p.actor = ParamStore::zeros(&p.actor_spec);
        p.critic = ParamStore::zeros(&p.critic_spec);
        p
    }

    #[test]
    fn uniform_logits_give_uniform_probabilities() {
        let p = uniform_policy(3);
        let dist = action_distribution(&p, &[0.5, -0.5, 1.0]).unwrap();
        for prob in dist {
            assert!((prob - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let p = PolicyModel::new(Backbone::Ippo, 4, 1, &[8, 8], 11).unwrap();
        for trial in 0..50 {
            let obs: Vec<Real> = (0..4).map(|i| ((trial * 7 + i) as Real).cos() * 2.0).collect();
            let dist = action_distribution(&p, &obs).unwrap();
            let sum: Real = dist.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_logit_dominates() {
        let mut p = uniform_policy(2);
        // Bias the third output logit sky-high.
        p.actor.biases_mut(p.actor_spec.n_layers() - 1)[2] = 1000.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (a, lp) = act(&p, &[0.0, 0.0], &mut rng).unwrap();
            assert_eq!(a, 2);
            assert!(lp.abs() < 1e-9);
        }
        assert_eq!(act_greedy(&p, &[0.0, 0.0]).unwrap().0, 2);
    }

    #[test]
    fn empirical_frequencies_match_softmax() {
        let p = PolicyModel::new(Backbone::Ippo, 3, 1, &[6], 3).unwrap();
        let obs = [0.3, -0.8, 0.1];
        let probs = action_distribution(&p, &obs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut counts = [0u32; N_ACTIONS];
        for _ in 0..n {
            let (a, _) = act(&p, &obs, &mut rng).unwrap();
            counts[a] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let mean = n as Real * probs[i];
            let sigma = (n as Real * probs[i] * (1.0 - probs[i])).sqrt();
            assert!(
                (c as Real - mean).abs() <= 3.0 * sigma,
                "action {i}: count {c}, expected {mean:.1} +- {sigma:.1}"
            );
        }
    }

    #[test]
    fn sampled_log_prob_matches_distribution() {
        let p = PolicyModel::new(Backbone::Ippo, 2, 1, &[5], 7).unwrap();
        let obs = [0.2, 0.9];
        let log_probs = action_log_probs(&p, &obs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (a, lp) = act(&p, &obs, &mut rng).unwrap();
            assert_eq!(lp, log_probs[a]);
        }
    }

    #[test]
    fn non_finite_logits_error() {
        let mut p = uniform_policy(2);
        p.actor.biases_mut(p.actor_spec.n_layers() - 1)[0] = Real::NAN;
        assert!(matches!(
            act(&p, &[0.0, 0.0], &mut ChaCha8Rng::seed_from_u64(0)),
            Err(MarlError::Numeric(_))
        ));
    }

    #[test]
    fn centralized_and_decentralized_critics_check_backbone() {
        let ippo = PolicyModel::new(Backbone::Ippo, 3, 2, &[4], 0).unwrap();
        let mappo = PolicyModel::new(Backbone::Mappo, 3, 2, &[4], 0).unwrap();
        assert!(value_of(&ippo, &[0.0; 3]).is_ok());
        assert!(value_of(&mappo, &[0.0; 3]).is_err());
        assert!(centralized_value(&mappo, &[0.0; 6]).is_ok());
        assert!(centralized_value(&ippo, &[0.0; 6]).is_err());
        // Wrong concatenation length is a dimension error.
        assert!(centralized_value(&mappo, &[0.0; 5]).is_err());
    }

    #[test]
    fn zero_critic_gives_zero_value() {
        let mut p = PolicyModel::new(Backbone::Mappo, 2, 3, &[4], 9).unwrap();
        p.critic = ParamStore::zeros(&p.critic_spec);
        assert_eq!(centralized_value(&p, &[0.4; 6]).unwrap(), 0.0);
    }

    #[test]
    fn backbones_share_the_action_selection_path() {
        // Same actor parameters and same generator state must sample the
        // same actions regardless of the critic wiring.
        let ippo = PolicyModel::new(Backbone::Ippo, 3, 2, &[6], 42).unwrap();
        let mut mappo = PolicyModel::new(Backbone::Mappo, 3, 2, &[6], 42).unwrap();
        mappo.actor = ippo.actor.clone();
        let obs = [0.1, -0.4, 0.7];
        let mut rng_a = ChaCha8Rng::seed_from_u64(123);
        let mut rng_b = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..50 {
            assert_eq!(
                act(&ippo, &obs, &mut rng_a).unwrap(),
                act(&mappo, &obs, &mut rng_b).unwrap()
            );
        }
    }
}
