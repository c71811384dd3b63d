use crate::gridworld::Cell;
use crate::Real;

/// Potential-based shaping over the goal distance:
/// `phi(s) = -scale * manhattan(position, goal)`, added to the base reward
/// as `discount * phi(s') - phi(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbrsShaper {
    pub discount: Real,
    /// Potential scale `c`. The environment pays 0.01 per step of progress,
    /// so the default keeps the shaping term on the same footing.
    pub scale: Real,
}

pub const DEFAULT_POTENTIAL_SCALE: Real = 0.01;

impl PbrsShaper {
    pub fn new(discount: Real, scale: Real) -> Self {
        Self { discount, scale }
    }

    pub fn potential(&self, position: Cell, goal: Cell) -> Real {
        -self.scale * position.manhattan(goal) as Real
    }

    /// `discount * phi(s') - phi(s)` for one agent's transition.
    pub fn shaping_term(&self, before: (Cell, Cell), after: (Cell, Cell)) -> Real {
        self.discount * self.potential(after.0, after.1) - self.potential(before.0, before.1)
    }
}

/// The additively shaped reward: base (sparse) reward plus the potential
/// term. `before` and `after` are the agent's (position, goal) in the two
/// states the transition connects.
pub fn pbrs_reward(
    base_sparse_reward: Real,
    before: (Cell, Cell),
    after: (Cell, Cell),
    shaper: &PbrsShaper,
) -> Real {
    base_sparse_reward + shaper.shaping_term(before, after)
}
