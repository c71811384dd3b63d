use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arms::{ArmsConfig, EnvSetup, ShapingMode};
use crate::gridworld::{generate_maze_map, generate_random_map, GridMap};
use crate::marl::{Backbone, PpoConfig};
use crate::Real;

use super::HarnessError;

/// The experiment configuration file (TOML). Every field has a default —
/// an empty file resolves to the full-scale baseline configuration — and
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub map: MapSection,
    pub env: EnvSection,
    pub train: TrainSection,
    pub ppo: PpoSection,
    pub arms: ArmsSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKindName {
    Random,
    Maze,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSection {
    pub width: usize,
    pub height: usize,
    pub density: Real,
    pub kind: MapKindName,
    pub seed: u64,
}

impl Default for MapSection {
    fn default() -> Self {
        Self {
            width: 20,
            height: 20,
            density: 0.3,
            kind: MapKindName::Random,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub n_agents: usize,
    pub fov_radius: usize,
    pub t_max: usize,
    /// Reward sparsification delay K (1 = dense).
    pub reward_delay: usize,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            n_agents: 8,
            fov_radius: 5,
            t_max: 256,
            reward_delay: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub shaping: ShapingModeName,
    pub backbone: BackboneName,
    /// Training budget in agent-actions (env steps times agents).
    pub step_budget: u64,
    pub seeds: Vec<u64>,
    /// Run seeds sequentially for bit-exact reproducibility; parallel
    /// seeds produce the same per-seed outputs but interleave wall-clock
    /// work.
    pub single_thread: bool,
    pub policy_hidden: Vec<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            shaping: ShapingModeName::None,
            backbone: BackboneName::Ippo,
            step_budget: 4_000_000,
            seeds: vec![0],
            single_thread: true,
            policy_hidden: vec![64, 64],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapingModeName {
    None,
    Pbrs,
    Arms,
}

impl From<ShapingModeName> for ShapingMode {
    fn from(v: ShapingModeName) -> Self {
        match v {
            ShapingModeName::None => ShapingMode::None,
            ShapingModeName::Pbrs => ShapingMode::Pbrs,
            ShapingModeName::Arms => ShapingMode::Arms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneName {
    Ippo,
    Mappo,
}

impl From<BackboneName> for Backbone {
    fn from(v: BackboneName) -> Self {
        match v {
            BackboneName::Ippo => Backbone::Ippo,
            BackboneName::Mappo => Backbone::Mappo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoSection {
    pub discount: Real,
    pub gae_lambda: Real,
    pub clip_ratio: Real,
    pub entropy_coef: Real,
    pub value_coef: Real,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub learning_rate: Real,
    pub rollout_horizon: usize,
    pub n_parallel_envs: usize,
}

impl Default for PpoSection {
    fn default() -> Self {
        let d = PpoConfig::default();
        Self {
            discount: d.discount,
            gae_lambda: d.gae_lambda,
            clip_ratio: d.clip_ratio,
            entropy_coef: d.entropy_coef,
            value_coef: d.value_coef,
            epochs: d.epochs,
            minibatch_size: d.minibatch_size,
            learning_rate: d.learning_rate,
            rollout_horizon: d.rollout_horizon,
            n_parallel_envs: d.n_parallel_envs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmsSection {
    pub segment_len: usize,
    pub buffer_capacity: usize,
    pub pairs_per_phase: usize,
    pub ranking_minibatch: usize,
    pub reward_learning_rate: Real,
    pub reward_scale: Real,
    pub reward_hidden: Vec<usize>,
    pub per_agent_theta: bool,
    pub pbrs_potential_scale: Real,
}

impl Default for ArmsSection {
    fn default() -> Self {
        let d = ArmsConfig::default();
        Self {
            segment_len: d.segment_len,
            buffer_capacity: d.buffer_capacity,
            pairs_per_phase: d.pairs_per_phase,
            ranking_minibatch: d.ranking_minibatch,
            reward_learning_rate: d.reward_learning_rate,
            reward_scale: d.reward_scale,
            reward_hidden: d.reward_hidden,
            per_agent_theta: d.per_agent_theta,
            pbrs_potential_scale: d.pbrs_potential_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub action_mode: EvalModeName,
    /// Episodes per map during evaluation (one environment per map/seed).
    pub seeds: Vec<u64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            action_mode: EvalModeName::Sample,
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalModeName {
    Sample,
    Greedy,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let config: Self =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |field: &str, why: String| {
            Err(HarnessError::Config(format!("{field}: {why}")))
        };
        if self.map.width < 4 || self.map.height < 4 {
            return fail("map.width/height", "must be at least 4".into());
        }
        if !(0.0..0.5).contains(&self.map.density) {
            return fail("map.density", format!("must be in [0, 0.5), got {}", self.map.density));
        }
        if self.env.n_agents == 0 {
            return fail("env.n_agents", "must be >= 1".into());
        }
        if self.env.t_max == 0 {
            return fail("env.t_max", "must be >= 1".into());
        }
        if self.env.reward_delay == 0 {
            return fail("env.reward_delay", "must be >= 1 (1 means dense)".into());
        }
        if self.train.seeds.is_empty() {
            return fail("train.seeds", "need at least one seed".into());
        }
        if self.eval.seeds.is_empty() {
            return fail("eval.seeds", "need at least one seed".into());
        }
        if self.train.policy_hidden.is_empty() || self.train.policy_hidden.contains(&0) {
            return fail("train.policy_hidden", "widths must be >= 1".into());
        }
        if self.arms.reward_hidden.is_empty() || self.arms.reward_hidden.contains(&0) {
            return fail("arms.reward_hidden", "widths must be >= 1".into());
        }
        self.ppo_config()
            .validate()
            .map_err(|e| HarnessError::Config(format!("ppo: {e}")))?;
        self.arms_config()
            .validate()
            .map_err(|e| HarnessError::Config(format!("arms: {e}")))?;
        Ok(())
    }

    pub fn build_map(&self) -> Result<GridMap, HarnessError> {
        let map = match self.map.kind {
            MapKindName::Random => {
                generate_random_map(self.map.width, self.map.height, self.map.density, self.map.seed)?
            }
            MapKindName::Maze => generate_maze_map(self.map.width, self.map.height, self.map.seed)?,
        };
        Ok(map)
    }

    pub fn ppo_config(&self) -> PpoConfig {
        PpoConfig {
            discount: self.ppo.discount,
            gae_lambda: self.ppo.gae_lambda,
            clip_ratio: self.ppo.clip_ratio,
            entropy_coef: self.ppo.entropy_coef,
            value_coef: self.ppo.value_coef,
            epochs: self.ppo.epochs,
            minibatch_size: self.ppo.minibatch_size,
            learning_rate: self.ppo.learning_rate,
            rollout_horizon: self.ppo.rollout_horizon,
            n_parallel_envs: self.ppo.n_parallel_envs,
        }
    }

    pub fn arms_config(&self) -> ArmsConfig {
        ArmsConfig {
            segment_len: self.arms.segment_len,
            buffer_capacity: self.arms.buffer_capacity,
            pairs_per_phase: self.arms.pairs_per_phase,
            ranking_minibatch: self.arms.ranking_minibatch,
            reward_learning_rate: self.arms.reward_learning_rate,
            reward_scale: self.arms.reward_scale,
            reward_hidden: self.arms.reward_hidden.clone(),
            per_agent_theta: self.arms.per_agent_theta,
            pbrs_potential_scale: self.arms.pbrs_potential_scale,
        }
    }

    pub fn env_setup(&self, map: GridMap) -> EnvSetup {
        EnvSetup {
            map,
            n_agents: self.env.n_agents,
            fov_radius: self.env.fov_radius,
            t_max: self.env.t_max,
            reward_delay: self.env.reward_delay,
        }
    }

    pub fn shaping_mode(&self) -> ShapingMode {
        self.train.shaping.into()
    }

    pub fn backbone(&self) -> Backbone {
        self.train.backbone.into()
    }
}
