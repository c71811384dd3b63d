//! Automatic reward shaping from trajectory ranking.
//!
//! The training signal for the policy is replaced by a learned per-action
//! reward. The reward network is trained online, in a phase that alternates
//! with policy optimization: fixed-length per-agent trajectory segments are
//! buffered, pairs are sampled and labeled by comparing their sparse
//! environmental returns, and a pairwise ranking loss pushes the shaped
//! return of the segment with the higher sparse return above the other's.
//! Two reward functions that order all trajectory pairs the same way
//! induce the same best responses (see the `theory` module), which is what
//! makes ranking-consistency the right training target.
//!
//! A hand-designed potential-based shaper over the goal distance serves as
//! the classic comparison baseline.

mod buffer;
mod pbrs;
mod ranking;
mod runner;
mod segment;
mod shaping;

pub use buffer::PairBuffer;
pub use pbrs::{pbrs_reward, PbrsShaper};
pub use ranking::{
    preference_label, ranking_loss_and_grad, ranking_update, ranking_update_minibatched,
    PreferenceLabel, RankingStats,
};
pub use runner::{run_arms, ArmsConfig, EnvSetup, RunArtifacts, ShapingMode};
pub use segment::TrajectorySegment;
pub use shaping::{preference_prob, segment_shaped_return, shaped_reward, ShapingBank, ShapingModel};

use crate::diffcore::DiffError;

#[derive(Debug, thiserror::Error)]
pub enum ArmsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cannot sample pairs: buffer holds {size} segments, need at least 2")]
    BufferTooSmall { size: usize },
    #[error(transparent)]
    Diff(#[from] DiffError),
}
