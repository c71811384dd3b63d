use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{plan_path, Cell, GridError, GridMap};
use crate::Real;

/// Dense environment reward for advancing onto the next waypoint.
pub const DENSE_STEP_REWARD: Real = 0.01;

/// The five simultaneous-move actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Stay,
    Up,
    Down,
    Left,
    Right,
}

pub const N_ACTIONS: usize = 5;

impl Action {
    pub const ALL: [Action; N_ACTIONS] =
        [Action::Stay, Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn from_index(index: usize) -> Result<Self, GridError> {
        Action::ALL
            .get(index)
            .copied()
            .ok_or_else(|| GridError::InvalidInput(format!("action index {index} out of range")))
    }

    pub fn index(self) -> usize {
        match self {
            Action::Stay => 0,
            Action::Up => 1,
            Action::Down => 2,
            Action::Left => 3,
            Action::Right => 4,
        }
    }

    fn delta(self) -> (i64, i64) {
        match self {
            Action::Stay => (0, 0),
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }
}

/// One agent: current position, goal, the planned path to the goal, and how
/// far along the path the agent has advanced.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub position: Cell,
    pub goal: Cell,
    /// Shortest path planned at the last goal assignment;
    /// `planned_path[0]` is the position it was planned from.
    pub planned_path: Vec<Cell>,
    /// Index of the last waypoint reached. The dense reward is paid only
    /// for advancing onto `planned_path[progress + 1]`.
    pub progress: usize,
    pub goals_reached: u64,
}

/// Two-channel local field of view of side `2R+1`, row-major.
///
/// `channel_path` holds `-1` on blocked cells (obstacles and off-grid),
/// `+1` on the not-yet-visited waypoints of the agent's own planned path,
/// and `0` elsewhere. `channel_agents` holds `+1` on cells occupied by any
/// agent, with the observing agent at the center.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub radius: usize,
    pub channel_path: Vec<Real>,
    pub channel_agents: Vec<Real>,
}

impl Observation {
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Flat vector layout: the path channel then the agent channel.
    pub fn flatten(&self) -> Vec<Real> {
        let mut v = Vec::with_capacity(2 * self.channel_path.len());
        v.extend_from_slice(&self.channel_path);
        v.extend_from_slice(&self.channel_agents);
        v
    }

    /// Length of the flattened observation for a given radius.
    pub fn flat_dim(radius: usize) -> usize {
        2 * (2 * radius + 1) * (2 * radius + 1)
    }
}

/// Per-agent results of one simultaneous step.
#[derive(Debug, Clone, Default)]
pub struct StepOutcome {
    pub dense_reward: Vec<Real>,
    pub collision_flag: Vec<bool>,
    pub goal_reached_flag: Vec<bool>,
}

/// Environment state. Confined to one environment instance; all operations
/// on it are single-threaded and deterministic given the reset seed and the
/// action sequence.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub map: GridMap,
    pub agents: Vec<AgentState>,
    pub timestep: usize,
    pub t_max: usize,
    pub fov_radius: usize,
    rng: ChaCha8Rng,
    /// Free cells of the largest connected component: the population starts
    /// and goals are drawn from.
    arena: Vec<Cell>,
}

impl WorldState {
    /// Places `n_agents` on distinct random free cells of the largest
    /// connected component, assigns each a random reachable goal distinct
    /// from its start, and plans the initial paths.
    pub fn reset(
        map: &GridMap,
        n_agents: usize,
        fov_radius: usize,
        t_max: usize,
        seed: u64,
    ) -> Result<(Self, Vec<Observation>), GridError> {
        if n_agents == 0 {
            return Err(GridError::InvalidInput("need at least one agent".into()));
        }
        let (labels, sizes) = map.component_labels();
        let largest = sizes
            .iter()
            .enumerate()
            .max_by_key(|&(id, &size)| (size, std::cmp::Reverse(id)))
            .map(|(id, _)| id as u32)
            .ok_or_else(|| GridError::Setup("map has no free cells".into()))?;
        let arena: Vec<Cell> = map
            .free_cells()
            .into_iter()
            .filter(|c| labels[c.row * map.width() + c.col] == Some(largest))
            .collect();
        // Each agent needs a start plus at least one other cell for a goal.
        if arena.len() < n_agents + 1 {
            return Err(GridError::Setup(format!(
                "{} usable free cells cannot host {n_agents} agents plus goals",
                arena.len()
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Partial Fisher-Yates: the first n_agents entries become starts.
        let mut pool = arena.clone();
        for i in 0..n_agents {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        let mut world = WorldState {
            map: map.clone(),
            agents: Vec::with_capacity(n_agents),
            timestep: 0,
            t_max,
            fov_radius,
            rng,
            arena,
        };
        for i in 0..n_agents {
            let position = pool[i];
            let goal = world.sample_goal(position)?;
            let planned_path = plan_path(&world.map, position, goal)?;
            world.agents.push(AgentState {
                position,
                goal,
                planned_path,
                progress: 0,
                goals_reached: 0,
            });
        }
        let obs = world.observe_all();
        Ok((world, obs))
    }

    /// Uniform draw over the arena, excluding the agent's own position.
    fn sample_goal(&mut self, position: Cell) -> Result<Cell, GridError> {
        debug_assert!(self.arena.len() >= 2);
        loop {
            let goal = self.arena[self.rng.gen_range(0..self.arena.len())];
            if goal != position {
                return Ok(goal);
            }
        }
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Advances every agent simultaneously.
    ///
    /// A move is blocked — the agent stays put with `collision_flag` set —
    /// when its target is an obstacle or off-grid, when two or more agents
    /// target the same cell, when two agents would swap cells, or when the
    /// target is held by an agent that does not move (including agents that
    /// were themselves blocked this step). Stay actions are never flagged.
    ///
    /// The dense reward is paid iff the agent advances onto the next
    /// unvisited waypoint of its planned path. Reaching the goal sets
    /// `goal_reached_flag`, assigns a fresh random goal, and replans.
    pub fn step(&mut self, actions: &[Action]) -> Result<(Vec<Observation>, StepOutcome), GridError> {
        if actions.len() != self.agents.len() {
            return Err(GridError::InvalidInput(format!(
                "got {} actions for {} agents",
                actions.len(),
                self.agents.len()
            )));
        }
        if self.timestep >= self.t_max {
            return Err(GridError::EpisodeOver { t_max: self.t_max });
        }
        let n = self.agents.len();
        let positions: Vec<Cell> = self.agents.iter().map(|a| a.position).collect();
        let mut intended = positions.clone();
        let mut collided = vec![false; n];

        // Obstacle and off-grid blocks.
        for (i, action) in actions.iter().enumerate() {
            let (dr, dc) = action.delta();
            if (dr, dc) == (0, 0) {
                continue;
            }
            let (r, c) = (positions[i].row as i64 + dr, positions[i].col as i64 + dc);
            if self.map.blocked(r, c) {
                collided[i] = true;
            } else {
                intended[i] = Cell::new(r as usize, c as usize);
            }
        }

        // Swap conflicts: both movers blocked.
        for i in 0..n {
            for j in i + 1..n {
                if intended[i] != positions[i]
                    && intended[j] != positions[j]
                    && intended[i] == positions[j]
                    && intended[j] == positions[i]
                {
                    collided[i] = true;
                    collided[j] = true;
                    intended[i] = positions[i];
                    intended[j] = positions[j];
                }
            }
        }

        // Vertex conflicts, iterated to a fixpoint so that blocking an agent
        // also blocks anyone moving into the cell it now keeps.
        loop {
            let mut by_cell: HashMap<Cell, Vec<usize>> = HashMap::new();
            for (i, &cell) in intended.iter().enumerate() {
                by_cell.entry(cell).or_default().push(i);
            }
            let mut changed = false;
            for group in by_cell.values() {
                if group.len() < 2 {
                    continue;
                }
                for &i in group {
                    if intended[i] != positions[i] {
                        intended[i] = positions[i];
                        collided[i] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        // Commit moves, pay waypoint rewards, reassign reached goals.
        let mut outcome = StepOutcome {
            dense_reward: vec![0.0; n],
            collision_flag: collided,
            goal_reached_flag: vec![false; n],
        };
        for i in 0..n {
            let agent = &mut self.agents[i];
            agent.position = intended[i];
            let next_waypoint = agent.progress + 1;
            if next_waypoint < agent.planned_path.len()
                && agent.position == agent.planned_path[next_waypoint]
            {
                agent.progress = next_waypoint;
                outcome.dense_reward[i] = DENSE_STEP_REWARD;
            }
            if agent.position == agent.goal {
                outcome.goal_reached_flag[i] = true;
                agent.goals_reached += 1;
                let position = agent.position;
                let goal = self.sample_goal(position)?;
                let agent = &mut self.agents[i];
                agent.goal = goal;
                agent.planned_path = plan_path(&self.map, position, goal)?;
                agent.progress = 0;
            }
        }
        self.timestep += 1;

        debug_assert!(self.occupancy_is_sound());
        Ok((self.observe_all(), outcome))
    }

    /// No two agents on one cell, nobody on an obstacle.
    pub fn occupancy_is_sound(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.agents
            .iter()
            .all(|a| !self.map.is_obstacle(a.position) && seen.insert(a.position))
    }

    pub fn observe_all(&self) -> Vec<Observation> {
        (0..self.agents.len()).map(|i| self.observe(i)).collect()
    }

    /// Builds agent `i`'s two-channel field of view from the current map,
    /// its planned path (future waypoints only), and all agent positions.
    pub fn observe(&self, agent_index: usize) -> Observation {
        let agent = &self.agents[agent_index];
        let r0 = agent.position.row as i64;
        let c0 = agent.position.col as i64;
        let radius = self.fov_radius as i64;
        let side = (2 * radius + 1) as usize;

        let waypoints: std::collections::HashSet<Cell> = agent.planned_path
            [agent.progress + 1..]
            .iter()
            .copied()
            .collect();
        let occupied: std::collections::HashSet<Cell> =
            self.agents.iter().map(|a| a.position).collect();

        let mut channel_path = vec![0.0; side * side];
        let mut channel_agents = vec![0.0; side * side];
        for dr in -radius..=radius {
            for dc in -radius..=radius {
                let idx = ((dr + radius) * (2 * radius + 1) + (dc + radius)) as usize;
                let (r, c) = (r0 + dr, c0 + dc);
                if self.map.blocked(r, c) {
                    channel_path[idx] = -1.0;
                    continue;
                }
                let cell = Cell::new(r as usize, c as usize);
                if waypoints.contains(&cell) {
                    channel_path[idx] = 1.0;
                }
                if occupied.contains(&cell) {
                    channel_agents[idx] = 1.0;
                }
            }
        }
        Observation {
            radius: self.fov_radius,
            channel_path,
            channel_agents,
        }
    }
}
