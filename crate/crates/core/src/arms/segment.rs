use crate::Real;

/// One agent's fixed-length slice of experience: `L` observations and
/// actions plus the discounted sums of the sparse (revealed) and dense
/// environment rewards over the slice. The sparse return is what preference
/// labels compare; the dense return is kept for diagnostics only.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment {
    pub agent_id: usize,
    pub start_timestep: usize,
    pub observations: Vec<Vec<Real>>,
    pub actions: Vec<usize>,
    pub sparse_return: Real,
    pub dense_return: Real,
}

impl TrajectorySegment {
    /// Builds a segment from per-step records, discounting rewards by
    /// `gamma^offset` relative to the segment start.
    pub fn from_steps(
        agent_id: usize,
        start_timestep: usize,
        steps: Vec<(Vec<Real>, usize, Real, Real)>,
        gamma: Real,
    ) -> Self {
        let mut sparse_return = 0.0;
        let mut dense_return = 0.0;
        let mut disc = 1.0;
        let mut observations = Vec::with_capacity(steps.len());
        let mut actions = Vec::with_capacity(steps.len());
        for (obs, action, sparse, dense) in steps {
            sparse_return += disc * sparse;
            dense_return += disc * dense;
            disc *= gamma;
            observations.push(obs);
            actions.push(action);
        }
        Self {
            agent_id,
            start_timestep,
            observations,
            actions,
            sparse_return,
            dense_return,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discounted_returns_use_offset_from_segment_start() {
        let steps = vec![
            (vec![0.0], 1, 0.0, 0.01),
            (vec![0.0], 2, 0.02, 0.01),
            (vec![0.0], 0, 0.0, 0.0),
        ];
        let seg = TrajectorySegment::from_steps(3, 10, steps, 0.5);
        assert_eq!(seg.agent_id, 3);
        assert_eq!(seg.start_timestep, 10);
        assert_eq!(seg.len(), 3);
        assert!((seg.sparse_return - 0.5 * 0.02).abs() < 1e-15);
        assert!((seg.dense_return - (0.01 + 0.5 * 0.01)).abs() < 1e-15);
    }
}
