use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ArmsError, TrajectorySegment};

/// FIFO ring buffer of trajectory segments. Segments from all agents
/// commingle; the shaping parameters are shared, so any two segments are
/// comparable.
#[derive(Debug, Clone)]
pub struct PairBuffer {
    capacity: usize,
    segment_len: usize,
    segments: VecDeque<TrajectorySegment>,
    inserted: u64,
}

impl PairBuffer {
    pub fn new(capacity: usize, segment_len: usize) -> Self {
        Self {
            capacity,
            segment_len,
            segments: VecDeque::with_capacity(capacity.min(1 << 16)),
            inserted: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total number of segments ever inserted.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, index: usize) -> &TrajectorySegment {
        &self.segments[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrajectorySegment> {
        self.segments.iter()
    }

    /// Appends segments in order, evicting the oldest beyond capacity.
    /// Every segment must have the configured length.
    pub fn store_segments(&mut self, segments: Vec<TrajectorySegment>) -> Result<(), ArmsError> {
        for seg in &segments {
            if seg.len() != self.segment_len {
                return Err(ArmsError::InvalidInput(format!(
                    "segment of length {} in a buffer of {}-step segments",
                    seg.len(),
                    self.segment_len
                )));
            }
        }
        for seg in segments {
            if self.segments.len() == self.capacity {
                self.segments.pop_front();
            }
            self.segments.push_back(seg);
            self.inserted += 1;
        }
        Ok(())
    }

    /// Draws `k` index pairs uniformly, with replacement across pairs; the
    /// two members of a pair are always distinct segments.
    pub fn sample_pairs(
        &self,
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<(usize, usize)>, ArmsError> {
        if self.segments.len() < 2 {
            return Err(ArmsError::BufferTooSmall {
                size: self.segments.len(),
            });
        }
        let n = self.segments.len();
        let mut pairs = Vec::with_capacity(k);
        for _ in 0..k {
            let a = rng.gen_range(0..n);
            let b = loop {
                let b = rng.gen_range(0..n);
                if b != a {
                    break b;
                }
            };
            pairs.push((a, b));
        }
        Ok(pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn seg(tag: usize) -> TrajectorySegment {
        TrajectorySegment {
            agent_id: tag,
            start_timestep: tag,
            observations: vec![vec![0.0]; 4],
            actions: vec![0; 4],
            sparse_return: tag as f64,
            dense_return: 0.0,
        }
    }

    #[test]
    fn fifo_eviction_beyond_capacity() {
        let mut buf = PairBuffer::new(3, 4);
        buf.store_segments((0..4).map(seg).collect()).unwrap();
        assert_eq!(buf.len(), 3);
        let ids: Vec<usize> = buf.iter().map(|s| s.agent_id).collect();
        assert_eq!(ids, vec![1, 2, 3]); // the first insert was evicted
        assert_eq!(buf.inserted(), 4);
    }

    #[test]
    fn storing_nothing_changes_nothing() {
        let mut buf = PairBuffer::new(3, 4);
        buf.store_segments(vec![seg(0)]).unwrap();
        let before: Vec<usize> = buf.iter().map(|s| s.agent_id).collect();
        buf.store_segments(vec![]).unwrap();
        let after: Vec<usize> = buf.iter().map(|s| s.agent_id).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn wrong_length_segments_are_rejected() {
        let mut buf = PairBuffer::new(3, 8);
        assert!(buf.store_segments(vec![seg(0)]).is_err());
        assert_eq!(buf.len(), 0);
    }

    #[test]
    fn half_renewal_at_paper_sizes() {
        let mut buf = PairBuffer::new(16_384, 4);
        buf.store_segments((0..16_384).map(seg).collect()).unwrap();
        // Inserting 8192 fresh segments renews exactly half the buffer.
        buf.store_segments((100_000..108_192).map(seg).collect()).unwrap();
        let fresh = buf.iter().filter(|s| s.agent_id >= 100_000).count();
        assert_eq!(fresh, 8_192);
        assert_eq!(buf.len(), 16_384);
    }

    #[test]
    fn sampling_needs_two_segments_and_k_zero_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buf = PairBuffer::new(4, 4);
        buf.store_segments(vec![seg(0)]).unwrap();
        assert!(buf.sample_pairs(1, &mut rng).is_err());
        buf.store_segments(vec![seg(1)]).unwrap();
        assert_eq!(buf.sample_pairs(0, &mut rng).unwrap(), vec![]);
        // With exactly two segments every pair is the same unordered pair.
        for (a, b) in buf.sample_pairs(50, &mut rng).unwrap() {
            assert_ne!(a, b);
            assert!(a < 2 && b < 2);
        }
    }

    #[test]
    fn pair_inclusion_is_uniform() {
        // Over a size-10 buffer there are 45 unordered pairs; check
        // empirical frequencies against the binomial 3-sigma band.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut buf = PairBuffer::new(10, 4);
        buf.store_segments((0..10).map(seg).collect()).unwrap();
        let draws = 100_000;
        let mut counts = std::collections::HashMap::new();
        for (a, b) in buf.sample_pairs(draws, &mut rng).unwrap() {
            *counts.entry((a.min(b), a.max(b))).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 45);
        let p = 1.0 / 45.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (&pair, &count) in &counts {
            let diff = (count as f64 - draws as f64 * p).abs();
            assert!(diff <= 3.0 * sigma, "pair {pair:?} count {count}");
        }
    }
}
