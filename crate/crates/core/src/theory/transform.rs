use crate::Real;

use super::{
    game::{enumerate_profiles, return_of, TinyGame},
    TheoryError, DEFAULT_PROFILE_BOUND,
};

/// A strictly increasing map over the finite set of returns a game can
/// realize, stored as sorted (base return, transformed return) pairs.
///
/// With a fixed horizon and finitely many trajectories, any strictly
/// increasing transform of trajectory returns is realizable by adjusting
/// the final step's reward per trajectory class; looking the whole return
/// up in a table is the same adjustment applied at the end of the rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMap {
    pairs: Vec<(Real, Real)>,
}

impl ReturnMap {
    /// Builds a map and validates strict monotonicity: base returns are
    /// deduplicated, and transformed values must be strictly increasing in
    /// the base return.
    pub fn new(mut pairs: Vec<(Real, Real)>) -> Result<Self, TheoryError> {
        if pairs.is_empty() {
            return Err(TheoryError::InvalidTransform("empty return map".into()));
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 != w[1].1 {
                return Err(TheoryError::InvalidTransform(format!(
                    "base return {} maps to both {} and {}",
                    w[0].0, w[0].1, w[1].1
                )));
            }
            if w[0].0 < w[1].0 && w[0].1 >= w[1].1 {
                return Err(TheoryError::InvalidTransform(format!(
                    "not strictly increasing: f({}) = {} but f({}) = {}",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        pairs.dedup_by(|a, b| a.0 == b.0);
        Ok(Self { pairs })
    }

    /// Builds a map without the monotonicity check. Intended for negative
    /// controls that need a deliberately order-breaking transform.
    pub fn new_unchecked(mut pairs: Vec<(Real, Real)>) -> Self {
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pairs.dedup_by(|a, b| a.0 == b.0);
        Self { pairs }
    }

    /// Looks up a realized return. The table is built from the same exact
    /// rollouts that produce `base`, so lookups always hit.
    pub fn apply(&self, base: Real) -> Real {
        match self
            .pairs
            .binary_search_by(|p| p.0.partial_cmp(&base).unwrap())
        {
            Ok(i) => self.pairs[i].1,
            Err(_) => panic!("return {base} was not in the realized-return table"),
        }
    }
}

/// Order-preserving reward transforms for one agent.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderTransform {
    /// Multiply every per-step reward by `c > 0`.
    Scale(Real),
    /// Add `b` to every per-step reward; order-preserving because the
    /// horizon is fixed, so every return shifts by `b * sum_t gamma^t`.
    PerStepShift(Real),
    /// Map whole-trajectory returns through a strictly increasing function,
    /// given by its values on the realized returns.
    MonotoneOnReturns(Vec<(Real, Real)>),
}

impl OrderTransform {
    /// Builds a `MonotoneOnReturns` transform for `agent` by applying `f`
    /// to every return the game realizes. Fails if `f` is not strictly
    /// increasing on that set.
    pub fn monotone_from_fn(
        game: &TinyGame,
        agent: usize,
        f: impl Fn(Real) -> Real,
    ) -> Result<Self, TheoryError> {
        let pairs = realized_returns(game, agent)?
            .into_iter()
            .map(|g| (g, f(g)))
            .collect();
        // Validate eagerly so the caller learns about a bad `f` here.
        ReturnMap::new(pairs).map(|m| OrderTransform::MonotoneOnReturns(m.pairs))
    }
}

/// Every distinct return `agent` can obtain over all pure profiles.
pub fn realized_returns(game: &TinyGame, agent: usize) -> Result<Vec<Real>, TheoryError> {
    let mut returns: Vec<Real> = enumerate_profiles(game, DEFAULT_PROFILE_BOUND)?
        .map(|p| return_of(game, &p, agent))
        .collect();
    returns.sort_by(|a, b| a.partial_cmp(b).unwrap());
    returns.dedup();
    Ok(returns)
}

/// Returns a new game identical to `game` except that `agent`'s reward
/// function is replaced by the order-equivalent transform.
pub fn apply_transform(
    game: &TinyGame,
    agent: usize,
    transform: &OrderTransform,
) -> Result<TinyGame, TheoryError> {
    if agent >= game.n_agents {
        return Err(TheoryError::Structure(format!(
            "agent {agent} out of range for {} agents",
            game.n_agents
        )));
    }
    if game.return_maps[agent].is_some() {
        return Err(TheoryError::InvalidTransform(
            "stacking transforms on an already return-mapped agent is not supported".into(),
        ));
    }
    let mut out = game.clone();
    match transform {
        OrderTransform::Scale(c) => {
            if !(*c > 0.0) {
                return Err(TheoryError::InvalidTransform(format!(
                    "scale factor must be positive, got {c}"
                )));
            }
            for r in &mut out.reward[agent] {
                *r *= c;
            }
        }
        OrderTransform::PerStepShift(b) => {
            for r in &mut out.reward[agent] {
                *r += b;
            }
        }
        OrderTransform::MonotoneOnReturns(pairs) => {
            let map = ReturnMap::new(pairs.clone())?;
            // The map must cover every realizable return.
            for g in realized_returns(game, agent)? {
                if map
                    .pairs
                    .binary_search_by(|p| p.0.partial_cmp(&g).unwrap())
                    .is_err()
                {
                    return Err(TheoryError::InvalidTransform(format!(
                        "return map does not cover realized return {g}"
                    )));
                }
            }
            out.return_maps[agent] = Some(map);
        }
    }
    Ok(out)
}

/// Installs a return map for `agent` without any monotonicity validation.
/// This exists so negative controls can construct order-breaking reward
/// replacements; everything else should go through [`apply_transform`].
pub fn apply_return_map_unchecked(game: &TinyGame, agent: usize, pairs: Vec<(Real, Real)>) -> TinyGame {
    let mut out = game.clone();
    out.return_maps[agent] = Some(ReturnMap::new_unchecked(pairs));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::game::tests::constant_game;

    #[test]
    fn scale_one_is_identity() {
        let g = constant_game(2, 2, 2, 0.5, |i, j| (i + j) as Real / 8.0);
        let t = apply_transform(&g, 0, &OrderTransform::Scale(1.0)).unwrap();
        assert_eq!(g, t);
    }

    #[test]
    fn scale_must_be_positive() {
        let g = constant_game(1, 2, 1, 1.0, |_, _| 0.0);
        assert!(apply_transform(&g, 0, &OrderTransform::Scale(0.0)).is_err());
        assert!(apply_transform(&g, 0, &OrderTransform::Scale(-2.0)).is_err());
    }

    #[test]
    fn per_step_shift_moves_returns_by_discount_sum() {
        let g = constant_game(1, 2, 3, 0.5, |_, j| j as Real / 4.0);
        let t = apply_transform(&g, 0, &OrderTransform::PerStepShift(0.5)).unwrap();
        let disc_sum = 1.0 + 0.5 + 0.25;
        for policy in 0..g.n_policies(0) {
            let before = return_of(&g, &vec![policy], 0);
            let after = return_of(&t, &vec![policy], 0);
            assert_eq!(after, before + 0.5 * disc_sum);
        }
    }

    #[test]
    fn monotone_map_applies_f_to_every_return() {
        let g = constant_game(1, 3, 2, 0.5, |_, j| j as Real / 8.0);
        let f = |x: Real| 2.0 * x + 1.0;
        let t = apply_transform(&g, 0, &OrderTransform::monotone_from_fn(&g, 0, f).unwrap())
            .unwrap();
        for policy in 0..g.n_policies(0) {
            assert_eq!(return_of(&t, &vec![policy], 0), f(return_of(&g, &vec![policy], 0)));
        }
    }

    #[test]
    fn non_monotone_f_is_rejected() {
        let g = constant_game(1, 3, 1, 1.0, |_, j| j as Real);
        let err = OrderTransform::monotone_from_fn(&g, 0, |x| -x).unwrap_err();
        assert!(matches!(err, TheoryError::InvalidTransform(_)));
    }
}
