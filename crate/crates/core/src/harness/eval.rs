use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gridworld::{Action, GridMap, WorldState};
use crate::marl::{act, act_greedy, MarlError, PolicyModel};
use crate::Real;

use super::{fmt_real, HarnessError};

/// How actions are chosen during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Sample from the policy's softmax, matching training-time behavior.
    Sample,
    /// Always take the highest-probability action.
    Greedy,
}

/// Raw counts from one fixed-length evaluation episode.
#[derive(Debug, Clone)]
pub struct EpisodeStats {
    /// Cumulative dense reward after each step, averaged over agents.
    pub cumulative_dense: Vec<Real>,
    pub goal_events: u64,
    pub collision_events: u64,
    pub t_max: usize,
    pub n_agents: usize,
}

impl EpisodeStats {
    /// Goal-reach events across all agents divided by the episode length.
    pub fn throughput(&self) -> Real {
        self.goal_events as Real / self.t_max as Real
    }

    /// Collision events across all agents divided by the episode length.
    pub fn normalized_collisions(&self) -> Real {
        self.collision_events as Real / self.t_max as Real
    }

    pub fn final_cumulative_dense(&self) -> Real {
        self.cumulative_dense.last().copied().unwrap_or(0.0)
    }
}

/// Runs one episode of `t_max` steps on `map` with the trained policy.
/// One environment instance per (map, seed).
pub fn run_episode(
    map: &GridMap,
    policy: &PolicyModel,
    n_agents: usize,
    fov_radius: usize,
    t_max: usize,
    mode: EvalMode,
    seed: u64,
) -> Result<EpisodeStats, MarlError> {
    let (mut world, mut obs) = WorldState::reset(
        map,
        n_agents,
        fov_radius,
        t_max,
        crate::seed::derive(seed, "eval-episode"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(seed, "eval-actions"));
    let mut stats = EpisodeStats {
        cumulative_dense: Vec::with_capacity(t_max),
        goal_events: 0,
        collision_events: 0,
        t_max,
        n_agents,
    };
    let mut cumulative = 0.0;
    let mut actions = vec![Action::Stay; n_agents];
    for _ in 0..t_max {
        for (a, action) in actions.iter_mut().enumerate() {
            let flat = obs[a].flatten();
            let chosen = match mode {
                EvalMode::Sample => act(policy, &flat, &mut rng)?.0,
                EvalMode::Greedy => act_greedy(policy, &flat)?.0,
            };
            *action = Action::from_index(chosen)?;
        }
        let (next_obs, outcome) = world.step(&actions)?;
        obs = next_obs;
        stats.goal_events += outcome.goal_reached_flag.iter().filter(|g| **g).count() as u64;
        stats.collision_events += outcome.collision_flag.iter().filter(|c| **c).count() as u64;
        cumulative += outcome.dense_reward.iter().sum::<Real>() / n_agents as Real;
        stats.cumulative_dense.push(cumulative);
    }
    Ok(stats)
}

/// One map's evaluation summary, averaged over the evaluation seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct MapEval {
    pub map_index: usize,
    pub final_cumulative_dense: Real,
    pub throughput: Real,
    pub normalized_collisions: Real,
}

/// Evaluation across a collection of maps: per-map summaries plus
/// mean and standard deviation over maps.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub t_max: usize,
    pub n_agents: usize,
    pub per_map: Vec<MapEval>,
}

impl EvalReport {
    pub fn mean_throughput(&self) -> Real {
        mean(self.per_map.iter().map(|m| m.throughput))
    }

    pub fn mean_normalized_collisions(&self) -> Real {
        mean(self.per_map.iter().map(|m| m.normalized_collisions))
    }

    pub fn mean_final_cumulative_dense(&self) -> Real {
        mean(self.per_map.iter().map(|m| m.final_cumulative_dense))
    }
}

fn mean(values: impl Iterator<Item = Real>) -> Real {
    let v: Vec<Real> = values.collect();
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<Real>() / v.len() as Real
}

fn std_dev(values: &[Real]) -> Real {
    if values.len() < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<Real>() / values.len() as Real;
    (values.iter().map(|v| (v - m) * (v - m)).sum::<Real>() / values.len() as Real).sqrt()
}

/// Evaluates the policy on every map, one episode per (map, seed),
/// averaging the per-map metrics across seeds.
pub fn run_eval(
    policy: &PolicyModel,
    maps: &[GridMap],
    seeds: &[u64],
    n_agents: usize,
    fov_radius: usize,
    t_max: usize,
    mode: EvalMode,
) -> Result<EvalReport, MarlError> {
    if maps.is_empty() || seeds.is_empty() {
        return Err(MarlError::InvalidInput("need at least one map and one seed".into()));
    }
    let mut per_map = Vec::with_capacity(maps.len());
    for (map_index, map) in maps.iter().enumerate() {
        let mut reward = 0.0;
        let mut throughput = 0.0;
        let mut collisions = 0.0;
        for &s in seeds {
            let seed = crate::seed::derive_indexed(s, "eval-map", map_index as u64);
            let ep = run_episode(map, policy, n_agents, fov_radius, t_max, mode, seed)?;
            reward += ep.final_cumulative_dense();
            throughput += ep.throughput();
            collisions += ep.normalized_collisions();
        }
        let n = seeds.len() as Real;
        per_map.push(MapEval {
            map_index,
            final_cumulative_dense: reward / n,
            throughput: throughput / n,
            normalized_collisions: collisions / n,
        });
    }
    Ok(EvalReport {
        t_max,
        n_agents,
        per_map,
    })
}

/// Writes the evaluation report CSV: one row per map plus `mean` and `std`
/// aggregate rows. A `#` comment line documents the episode protocol.
pub fn emit_eval_csv<W: Write>(report: &EvalReport, w: &mut W) -> Result<(), HarnessError> {
    writeln!(
        w,
        "# one environment per (map, seed); episodes of {} steps; {} agents",
        report.t_max, report.n_agents
    )?;
    writeln!(w, "map,final_cumulative_dense,throughput,normalized_collisions")?;
    for m in &report.per_map {
        writeln!(
            w,
            "{},{},{},{}",
            m.map_index,
            fmt_real(m.final_cumulative_dense),
            fmt_real(m.throughput),
            fmt_real(m.normalized_collisions)
        )?;
    }
    let rewards: Vec<Real> = report.per_map.iter().map(|m| m.final_cumulative_dense).collect();
    let throughputs: Vec<Real> = report.per_map.iter().map(|m| m.throughput).collect();
    let collisions: Vec<Real> = report.per_map.iter().map(|m| m.normalized_collisions).collect();
    writeln!(
        w,
        "mean,{},{},{}",
        fmt_real(report.mean_final_cumulative_dense()),
        fmt_real(report.mean_throughput()),
        fmt_real(report.mean_normalized_collisions())
    )?;
    writeln!(
        w,
        "std,{},{},{}",
        fmt_real(std_dev(&rewards)),
        fmt_real(std_dev(&throughputs)),
        fmt_real(std_dev(&collisions))
    )?;
    Ok(())
}
