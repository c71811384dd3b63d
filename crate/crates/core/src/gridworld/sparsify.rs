use super::{GridError, DENSE_STEP_REWARD};
use crate::Real;

/// Reward-sparsification wrapper: accumulates each agent's dense rewards
/// and reveals the accumulated sum every `K` steps, flushing the partial
/// interval at episode end so no reward is silently dropped.
///
/// The environment pays rewards only in whole multiples of a fixed quantum
/// (`DENSE_STEP_REWARD`), and the accumulator counts those quanta as
/// integers. Regrouping float additions would drift by an ulp once three or
/// more quanta land in one interval; counting makes conservation exact:
/// over any episode the revealed quanta equal the dense quanta, as
/// integers.
#[derive(Debug, Clone)]
pub struct SparsifierState {
    delay: usize,
    quantum: Real,
    accumulator: Vec<u64>,
}

impl SparsifierState {
    pub fn new(n_agents: usize, delay: usize) -> Result<Self, GridError> {
        Self::with_quantum(n_agents, delay, DENSE_STEP_REWARD)
    }

    pub fn with_quantum(n_agents: usize, delay: usize, quantum: Real) -> Result<Self, GridError> {
        if delay == 0 {
            return Err(GridError::InvalidInput("reward delay must be >= 1".into()));
        }
        if !(quantum > 0.0) {
            return Err(GridError::InvalidInput("reward quantum must be positive".into()));
        }
        Ok(Self {
            delay,
            quantum,
            accumulator: vec![0; n_agents],
        })
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Number of reward quanta in `value`, which must be a whole multiple
    /// of the quantum.
    pub fn quanta_of(&self, value: Real) -> u64 {
        let q = (value / self.quantum).round();
        debug_assert!(
            (value - q * self.quantum).abs() <= self.quantum * 1e-6,
            "reward {value} is not a multiple of the quantum {}",
            self.quantum
        );
        q as u64
    }

    /// Feeds one dense reward for `agent` at in-episode timestep `t`
    /// (0-based, incremented by one per call per agent) and returns the
    /// revealed reward: the accumulated sum at interval ends and at episode
    /// end, zero otherwise.
    pub fn reveal(&mut self, agent: usize, dense: Real, t: usize, episode_end: bool) -> Real {
        self.accumulator[agent] += self.quanta_of(dense);
        if (t + 1) % self.delay == 0 || episode_end {
            let count = std::mem::take(&mut self.accumulator[agent]);
            count as Real * self.quantum
        } else {
            0.0
        }
    }

    /// Resets the accumulators for a fresh episode.
    pub fn reset(&mut self) {
        self.accumulator.iter_mut().for_each(|a| *a = 0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_one_is_identity() {
        let mut s = SparsifierState::new(1, 1).unwrap();
        for (t, dense) in [0.01, 0.0, 0.01, 0.0].into_iter().enumerate() {
            assert_eq!(s.reveal(0, dense, t, false), dense);
        }
    }

    #[test]
    fn delay_two_batches_rewards() {
        let mut s = SparsifierState::new(1, 2).unwrap();
        let dense = [0.01, 0.0, 0.0, 0.01];
        let expected = [0.0, 0.01, 0.0, 0.01];
        for (t, (d, e)) in dense.into_iter().zip(expected).enumerate() {
            assert_eq!(s.reveal(0, d, t, false), e);
        }
    }

    #[test]
    fn episode_end_flushes_partial_interval() {
        let mut s = SparsifierState::new(2, 5).unwrap();
        let dense = [0.01, 0.01, 0.0];
        let mut total = 0.0;
        for (t, d) in dense.into_iter().enumerate() {
            total += s.reveal(1, d, t, t == dense.len() - 1);
        }
        assert_eq!(total, 0.02);
    }

    #[test]
    fn conservation_in_quanta_is_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for delay in [1, 3, 7, 10] {
            let mut s = SparsifierState::new(1, delay).unwrap();
            let horizon = 53; // deliberately not a multiple of any delay
            let mut dense_quanta = 0u64;
            let mut revealed_quanta = 0u64;
            for t in 0..horizon {
                let dense = if rng.gen_bool(0.4) { DENSE_STEP_REWARD } else { 0.0 };
                dense_quanta += s.quanta_of(dense);
                let revealed = s.reveal(0, dense, t, t == horizon - 1);
                revealed_quanta += s.quanta_of(revealed);
            }
            assert_eq!(revealed_quanta, dense_quanta, "delay {delay}");
        }
    }

    #[test]
    fn zero_delay_rejected() {
        assert!(SparsifierState::new(1, 0).is_err());
    }
}
