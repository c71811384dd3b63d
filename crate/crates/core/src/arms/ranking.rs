use crate::diffcore::{adam_step, mlp_backward, mlp_forward};
use crate::{AdamState, Tensor};
use crate::gridworld::N_ACTIONS;
use crate::Real;

use super::{ArmsError, ShapingModel, TrajectorySegment};

/// Pairwise preference from sparse environmental returns. Ties carry no
/// ordering information and are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreferenceLabel {
    APreferred,
    BPreferred,
    Skip,
}

/// Labels a pair by comparing sparse returns; the segment with the higher
/// sparse return is preferred. Antisymmetric by construction.
pub fn preference_label(a: &TrajectorySegment, b: &TrajectorySegment) -> PreferenceLabel {
    if a.sparse_return < b.sparse_return {
        PreferenceLabel::BPreferred
    } else if a.sparse_return > b.sparse_return {
        PreferenceLabel::APreferred
    } else {
        PreferenceLabel::Skip
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingStats {
    pub pairs_used: usize,
    pub pairs_skipped: usize,
    /// Mean binary cross-entropy over used pairs; 0 when none were used.
    pub mean_loss: Real,
    /// Fraction of used pairs whose shaped-return ordering matches the
    /// sparse-return ordering; ties of shaped return count as half.
    pub accuracy: Real,
    /// Set when every sampled pair was a tie, making the pass a no-op.
    pub all_skipped: bool,
}

/// Mean ranking loss over the labeled pairs and its exact gradient with
/// respect to the model parameters.
///
/// For a pair whose preferred segment has shaped return `G_hi` and the
/// other `G_lo`, the loss is `-ln sigma(G_hi - G_lo)`: minimizing it pushes
/// the preferred segment's shaped return up. Skipped (tied) pairs are
/// excluded from both the loss and the gradient.
pub fn ranking_loss_and_grad(
    model: &ShapingModel,
    pairs: &[(&TrajectorySegment, &TrajectorySegment)],
    gamma: Real,
) -> Result<(Real, Vec<Real>, RankingStats), ArmsError> {
    let obs_dim = model.obs_dim();
    // Gather the steps of every segment that participates in a non-tied
    // pair into one batch; rows stay grouped by segment.
    struct SegmentRows {
        row_start: usize,
        len: usize,
    }
    let mut rows: Vec<Real> = Vec::new();
    let mut row_actions: Vec<usize> = Vec::new();
    let mut used: Vec<(SegmentRows, SegmentRows)> = Vec::new();
    let mut skipped = 0usize;
    let push_segment = |seg: &TrajectorySegment,
                            rows: &mut Vec<Real>,
                            row_actions: &mut Vec<usize>|
     -> Result<SegmentRows, ArmsError> {
        let row_start = row_actions.len();
        for (obs, &action) in seg.observations.iter().zip(&seg.actions) {
            if obs.len() != obs_dim {
                return Err(ArmsError::InvalidInput(format!(
                    "segment observation has {} entries, model expects {obs_dim}",
                    obs.len()
                )));
            }
            rows.extend_from_slice(obs);
            row_actions.push(action);
        }
        Ok(SegmentRows {
            row_start,
            len: seg.len(),
        })
    };
    for (a, b) in pairs {
        match preference_label(a, b) {
            PreferenceLabel::Skip => skipped += 1,
            label => {
                let (lo, hi) = match label {
                    PreferenceLabel::BPreferred => (a, b),
                    PreferenceLabel::APreferred => (b, a),
                    PreferenceLabel::Skip => unreachable!(),
                };
                let lo_rows = push_segment(lo, &mut rows, &mut row_actions)?;
                let hi_rows = push_segment(hi, &mut rows, &mut row_actions)?;
                used.push((lo_rows, hi_rows));
            }
        }
    }

    if used.is_empty() {
        let stats = RankingStats {
            pairs_used: 0,
            pairs_skipped: skipped,
            mean_loss: 0.0,
            accuracy: 0.5,
            all_skipped: true,
        };
        return Ok((0.0, vec![0.0; model.params.len()], stats));
    }

    let n_rows = row_actions.len();
    let input = Tensor::matrix(n_rows, obs_dim, rows)?;
    let output = mlp_forward(&model.spec, &model.params, &input)?;

    // Shaped return of a stored segment from the batched outputs.
    let shaped_return = |seg: &SegmentRows| -> Real {
        let mut acc = 0.0;
        let mut disc = 1.0;
        for t in 0..seg.len {
            let row = seg.row_start + t;
            acc += disc * model.scale * output.row(row)[row_actions[row]];
            disc *= gamma;
        }
        acc
    };

    let n_used = used.len() as Real;
    let mut loss = 0.0;
    let mut correct = 0.0;
    let mut upstream = vec![0.0; n_rows * N_ACTIONS];
    for (lo, hi) in &used {
        let g_lo = shaped_return(lo);
        let g_hi = shaped_return(hi);
        let delta = g_hi - g_lo;
        // -ln(sigma(delta)), stable for either sign.
        loss += if delta >= 0.0 {
            (-delta).exp().ln_1p()
        } else {
            -delta + delta.exp().ln_1p()
        };
        if delta > 0.0 {
            correct += 1.0;
        } else if delta == 0.0 {
            correct += 0.5;
        }
        // dLoss/dG_hi = sigma(delta) - 1, dLoss/dG_lo = 1 - sigma(delta).
        let coeff = 1.0 - sigmoid(delta);
        for (seg, sign) in [(hi, -1.0), (lo, 1.0)] {
            let mut disc = 1.0;
            for t in 0..seg.len {
                let row = seg.row_start + t;
                upstream[row * N_ACTIONS + row_actions[row]] +=
                    sign * coeff * disc * model.scale / n_used;
                disc *= gamma;
            }
        }
    }
    loss /= n_used;
    let accuracy = correct / n_used;

    let upstream = Tensor::matrix(n_rows, N_ACTIONS, upstream)?;
    let (grads, _) = mlp_backward(&model.spec, &model.params, &input, &upstream)?;
    let stats = RankingStats {
        pairs_used: used.len(),
        pairs_skipped: skipped,
        mean_loss: loss,
        accuracy,
        all_skipped: false,
    };
    Ok((loss, grads.flat().to_vec(), stats))
}

fn sigmoid(x: Real) -> Real {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One optimizer pass over the sampled pairs: minimizes the binary
/// cross-entropy of the modeled preference against the sparse-return
/// labels, stepping once per full batch. When every pair is tied the pass
/// is a no-op and the returned stats carry the `all_skipped` flag.
pub fn ranking_update(
    model: &mut ShapingModel,
    opt: &mut AdamState,
    pairs: &[(&TrajectorySegment, &TrajectorySegment)],
    gamma: Real,
) -> Result<RankingStats, ArmsError> {
    let (_, grad, stats) = ranking_loss_and_grad(model, pairs, gamma)?;
    if stats.all_skipped {
        return Ok(stats);
    }
    let (new_params, new_opt) = adam_step(model.params.flat(), &grad, opt)?;
    model.params.flat_mut().copy_from_slice(&new_params);
    *opt = new_opt;
    Ok(stats)
}

/// One pass over the sampled pairs in minibatches, one optimizer step per
/// minibatch. Stats are aggregated over the whole pass; loss and accuracy
/// are averaged over the minibatches that had usable pairs.
pub fn ranking_update_minibatched(
    model: &mut ShapingModel,
    opt: &mut AdamState,
    pairs: &[(&TrajectorySegment, &TrajectorySegment)],
    gamma: Real,
    minibatch_size: usize,
) -> Result<RankingStats, ArmsError> {
    if minibatch_size == 0 {
        return Err(ArmsError::InvalidInput("minibatch size must be >= 1".into()));
    }
    let mut totals = RankingStats {
        pairs_used: 0,
        pairs_skipped: 0,
        mean_loss: 0.0,
        accuracy: 0.0,
        all_skipped: true,
    };
    let mut stepped = 0usize;
    for chunk in pairs.chunks(minibatch_size) {
        let stats = ranking_update(model, opt, chunk, gamma)?;
        totals.pairs_used += stats.pairs_used;
        totals.pairs_skipped += stats.pairs_skipped;
        if !stats.all_skipped {
            totals.mean_loss += stats.mean_loss;
            totals.accuracy += stats.accuracy;
            totals.all_skipped = false;
            stepped += 1;
        }
    }
    if stepped > 0 {
        totals.mean_loss /= stepped as Real;
        totals.accuracy /= stepped as Real;
    } else {
        totals.accuracy = 0.5;
    }
    Ok(totals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arms::shaping::DEFAULT_REWARD_SCALE;
    use crate::diffcore::{grad_check, AdamHyper, ParamStore};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_segment(rng: &mut ChaCha8Rng, obs_dim: usize, len: usize, sparse: Real) -> TrajectorySegment {
        TrajectorySegment {
            agent_id: 0,
            start_timestep: 0,
            observations: (0..len)
                .map(|_| (0..obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
            actions: (0..len).map(|_| rng.gen_range(0..N_ACTIONS)).collect(),
            sparse_return: sparse,
            dense_return: 0.0,
        }
    }

    #[test]
    fn labels_follow_sparse_returns_and_are_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_segment(&mut rng, 2, 3, 0.0);
        let b = random_segment(&mut rng, 2, 3, 0.05);
        let tie = random_segment(&mut rng, 2, 3, 0.0);
        assert_eq!(preference_label(&a, &b), PreferenceLabel::BPreferred);
        assert_eq!(preference_label(&b, &a), PreferenceLabel::APreferred);
        assert_eq!(preference_label(&a, &tie), PreferenceLabel::Skip);
    }

    #[test]
    fn fresh_zero_model_sits_at_ln_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = ShapingModel::new(3, &[4], DEFAULT_REWARD_SCALE, 0).unwrap();
        model.params = ParamStore::zeros(&model.spec);
        let a = random_segment(&mut rng, 3, 4, 0.0);
        let b = random_segment(&mut rng, 3, 4, 0.01);
        let pairs = vec![(&a, &b)];
        let (loss, _, stats) = ranking_loss_and_grad(&model, &pairs, 0.99).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(stats.accuracy, 0.5);
        assert_eq!(stats.pairs_used, 1);
    }

    #[test]
    fn all_tied_pairs_are_a_flagged_no_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = ShapingModel::new(3, &[4], DEFAULT_REWARD_SCALE, 0).unwrap();
        let before = model.params.clone();
        let mut opt = AdamState::new(model.params.len(), AdamHyper::default());
        let a = random_segment(&mut rng, 3, 4, 0.02);
        let b = random_segment(&mut rng, 3, 4, 0.02);
        let pairs = vec![(&a, &b)];
        let stats = ranking_update(&mut model, &mut opt, &pairs, 0.99).unwrap();
        assert!(stats.all_skipped);
        assert_eq!(stats.pairs_skipped, 1);
        assert_eq!(model.params, before);
        assert_eq!(opt.step(), 0);
    }

    #[test]
    fn well_separated_model_saturates() {
        // Train a tiny model on one strongly-labeled pair until the loss is
        // near zero and the ordering is learned. The tanh output bounds the
        // achievable shaped-return gap, so the scale here is generous.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = ShapingModel::new(2, &[8], 1.0, 5).unwrap();
        let mut opt = AdamState::new(model.params.len(), AdamHyper::with_step_size(3e-3));
        let a = random_segment(&mut rng, 2, 4, 0.0);
        let b = random_segment(&mut rng, 2, 4, 0.05);
        for _ in 0..2000 {
            let pairs = vec![(&a, &b)];
            ranking_update(&mut model, &mut opt, &pairs, 0.99).unwrap();
        }
        let pairs = vec![(&a, &b)];
        let (loss, _, stats) = ranking_loss_and_grad(&model, &pairs, 0.99).unwrap();
        assert!(loss < 0.05, "loss {loss}");
        assert_eq!(stats.accuracy, 1.0);
    }

    #[test]
    fn ranking_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..10 {
            let model = ShapingModel::new(3, &[6], DEFAULT_REWARD_SCALE, trial).unwrap();
            let segs: Vec<TrajectorySegment> = (0..4)
                .map(|i| random_segment(&mut rng, 3, 5, i as Real * 0.01))
                .collect();
            let pairs = vec![(&segs[0], &segs[1]), (&segs[2], &segs[3]), (&segs[3], &segs[0])];
            let (_, grad, _) = ranking_loss_and_grad(&model, &pairs, 0.97).unwrap();
            let err = grad_check(
                &model.params,
                &grad,
                |p| {
                    let probe = ShapingModel {
                        spec: model.spec.clone(),
                        params: p.clone(),
                        scale: model.scale,
                    };
                    ranking_loss_and_grad(&probe, &pairs, 0.97).unwrap().0
                },
                1e-5,
            );
            assert!(err < 1e-4, "trial {trial}: relative error {err}");
        }
    }
}
