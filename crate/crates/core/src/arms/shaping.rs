use crate::diffcore::{mlp_forward, Activation, MlpSpec};
use crate::ParamStore;
use crate::gridworld::N_ACTIONS;
use crate::{Real, Tensor};

use super::{ArmsError, TrajectorySegment};

/// The learned reward network: flattened observation in, one raw value per
/// action out, squashed by tanh and multiplied by `scale`. At the default
/// scale 0.1 every shaped reward lies strictly inside (-0.1, +0.1).
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingModel {
    pub spec: MlpSpec,
    pub params: ParamStore,
    pub scale: Real,
}

pub const DEFAULT_REWARD_SCALE: Real = 0.1;

impl ShapingModel {
    pub fn new(obs_dim: usize, hidden: &[usize], scale: Real, seed: u64) -> Result<Self, ArmsError> {
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(obs_dim);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(N_ACTIONS);
        let spec = MlpSpec::new(layer_sizes, Activation::Silu, Activation::Tanh)?;
        let params = ParamStore::init(&spec, seed)?;
        Ok(Self { spec, params, scale })
    }

    pub fn obs_dim(&self) -> usize {
        self.spec.input_dim()
    }

    /// Raw (pre-scale) per-action outputs for one observation.
    pub fn raw_outputs(&self, obs: &[Real]) -> Result<Vec<Real>, ArmsError> {
        let input = Tensor::vector(obs.to_vec())?;
        Ok(mlp_forward(&self.spec, &self.params, &input)?.data().to_vec())
    }
}

/// The learned reward for taking `action` under `obs`: the tanh-bounded
/// per-action output times the scale. Pure function of its inputs.
pub fn shaped_reward(model: &ShapingModel, obs: &[Real], action: usize) -> Result<Real, ArmsError> {
    if action >= N_ACTIONS {
        return Err(ArmsError::InvalidInput(format!(
            "action index {action} out of range"
        )));
    }
    Ok(model.scale * model.raw_outputs(obs)?[action])
}

/// Discounted sum of shaped rewards over a segment,
/// `sum_t gamma^t * shaped(obs_t, act_t)`.
pub fn segment_shaped_return(
    model: &ShapingModel,
    segment: &TrajectorySegment,
    gamma: Real,
) -> Result<Real, ArmsError> {
    let mut acc = 0.0;
    let mut disc = 1.0;
    for (obs, &action) in segment.observations.iter().zip(&segment.actions) {
        acc += disc * shaped_reward(model, obs, action)?;
        disc *= gamma;
    }
    Ok(acc)
}

/// Probability that `seg_b` is preferred over `seg_a` under the model:
/// `exp(G_b) / (exp(G_a) + exp(G_b))` with `G` the segments' shaped
/// returns, computed with max-subtraction. The preferred-probability mass
/// goes to the segment whose shaped return is higher.
pub fn preference_prob(
    model: &ShapingModel,
    seg_a: &TrajectorySegment,
    seg_b: &TrajectorySegment,
    gamma: Real,
) -> Result<Real, ArmsError> {
    let g_a = segment_shaped_return(model, seg_a, gamma)?;
    let g_b = segment_shaped_return(model, seg_b, gamma)?;
    Ok(preference_prob_from_returns(g_a, g_b))
}

/// `exp(g_b) / (exp(g_a) + exp(g_b))`, numerically stable.
pub fn preference_prob_from_returns(g_a: Real, g_b: Real) -> Real {
    let m = g_a.max(g_b);
    let e_a = (g_a - m).exp();
    let e_b = (g_b - m).exp();
    e_b / (e_a + e_b)
}

/// The set of shaping models in play: one shared across agents (the
/// default) or one per agent.
#[derive(Debug, Clone)]
pub struct ShapingBank {
    models: Vec<ShapingModel>,
    shared: bool,
}

impl ShapingBank {
    pub fn shared(model: ShapingModel) -> Self {
        Self {
            models: vec![model],
            shared: true,
        }
    }

    pub fn per_agent(models: Vec<ShapingModel>) -> Self {
        Self {
            models,
            shared: false,
        }
    }

    pub fn is_shared(&self) -> bool {
        self.shared
    }

    pub fn model_for(&self, agent: usize) -> &ShapingModel {
        if self.shared {
            &self.models[0]
        } else {
            &self.models[agent]
        }
    }

    pub fn models(&self) -> &[ShapingModel] {
        &self.models
    }

    pub fn models_mut(&mut self) -> &mut [ShapingModel] {
        &mut self.models
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_model(obs_dim: usize) -> ShapingModel {
        let mut m = ShapingModel::new(obs_dim, &[4], DEFAULT_REWARD_SCALE, 0).unwrap();
        m.params = ParamStore::zeros(&m.spec);
        m
    }

    fn seg_with(obs: Vec<Vec<Real>>, actions: Vec<usize>) -> TrajectorySegment {
        TrajectorySegment {
            agent_id: 0,
            start_timestep: 0,
            observations: obs,
            actions,
            sparse_return: 0.0,
            dense_return: 0.0,
        }
    }

    #[test]
    fn zero_parameters_give_zero_everywhere() {
        let m = zero_model(3);
        for action in 0..N_ACTIONS {
            assert_eq!(shaped_reward(&m, &[0.3, -0.7, 0.2], action).unwrap(), 0.0);
        }
        let seg = seg_with(vec![vec![0.5, 0.5, 0.5]; 4], vec![0, 1, 2, 3]);
        assert_eq!(segment_shaped_return(&m, &seg, 0.99).unwrap(), 0.0);
    }

    #[test]
    fn rewards_stay_inside_the_scaled_band() {
        let m = ShapingModel::new(4, &[8, 8], DEFAULT_REWARD_SCALE, 3).unwrap();
        for trial in 0..20 {
            let obs: Vec<Real> = (0..4).map(|i| ((trial * 4 + i) as Real).sin() * 3.0).collect();
            for action in 0..N_ACTIONS {
                let r = shaped_reward(&m, &obs, action).unwrap();
                assert!(r.abs() < DEFAULT_REWARD_SCALE);
            }
        }
    }

    #[test]
    fn action_index_selects_one_of_five_outputs() {
        let m = ShapingModel::new(2, &[6], DEFAULT_REWARD_SCALE, 7).unwrap();
        let obs = [0.4, -0.9];
        let raw = m.raw_outputs(&obs).unwrap();
        for action in 0..N_ACTIONS {
            assert_eq!(shaped_reward(&m, &obs, action).unwrap(), m.scale * raw[action]);
        }
        assert!(shaped_reward(&m, &obs, 5).is_err());
    }

    #[test]
    fn closed_form_discounted_sum() {
        // A constant shaped reward r over 3 steps at gamma = 0.9 sums to
        // r * (1 + 0.9 + 0.81).
        let m = ShapingModel::new(1, &[4], DEFAULT_REWARD_SCALE, 5).unwrap();
        let seg = seg_with(vec![vec![0.25]; 3], vec![2, 2, 2]);
        let r = shaped_reward(&m, &[0.25], 2).unwrap();
        let got = segment_shaped_return(&m, &seg, 0.9).unwrap();
        assert!((got - r * (1.0 + 0.9 + 0.81)).abs() < 1e-12);
    }

    #[test]
    fn preference_probabilities_are_symmetric_and_calibrated() {
        assert_eq!(preference_prob_from_returns(0.3, 0.3), 0.5);
        let e = std::f64::consts::E;
        assert!((preference_prob_from_returns(0.0, 1.0) - e / (1.0 + e)).abs() < 1e-12);
        for (a, b) in [(0.0, 1.0), (-3.0, 2.5), (700.0, -700.0), (1e-9, 0.0)] {
            let p = preference_prob_from_returns(a, b);
            let q = preference_prob_from_returns(b, a);
            assert!((p + q - 1.0).abs() < 1e-12, "a={a} b={b}");
        }
    }
}
