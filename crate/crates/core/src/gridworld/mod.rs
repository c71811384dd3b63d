//! Lifelong multi-agent pathfinding environment.
//!
//! Agents move simultaneously on a 4-connected occupancy grid. Each agent
//! follows a planned shortest path to its goal; reaching the goal assigns a
//! fresh goal and replans. Moves are blocked (and flagged as collisions) on
//! obstacle bumps, vertex conflicts, swap conflicts, and moves into cells
//! held by non-moving agents. A dense `+0.01` reward is paid for each
//! advance onto the next unvisited waypoint of the planned path; a
//! sparsification wrapper accumulates dense rewards and reveals them every
//! `K` steps.

mod env;
mod map;
mod path;
mod sparsify;

pub use env::{
    Action, AgentState, Observation, StepOutcome, WorldState, DENSE_STEP_REWARD, N_ACTIONS,
};
pub use map::{
    generate_maze_map, generate_random_map, load_map, save_map, Cell, GridMap, MapKind,
};
pub use path::plan_path;
pub use sparsify::SparsifierState;

/// Errors produced by the environment.
#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("map generation failed: {0}")]
    Generation(String),
    #[error("no path from ({},{}) to ({},{})", start.row, start.col, goal.row, goal.col)]
    Unreachable { start: Cell, goal: Cell },
    #[error("environment setup failed: {0}")]
    Setup(String),
    #[error("episode is over: timestep reached t_max = {t_max}")]
    EpisodeOver { t_max: usize },
    #[error("bad map file: {0}")]
    MapFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
