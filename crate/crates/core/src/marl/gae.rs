use crate::Real;

/// Generalized advantage estimation over one (env, agent) stream.
///
/// `bootstrap_value` estimates the state after the final step and is
/// masked away when that step ended an episode. Returns advantages and
/// value targets (`advantage + value`).
pub fn compute_gae(
    rewards: &[Real],
    values: &[Real],
    dones: &[bool],
    bootstrap_value: Real,
    discount: Real,
    lambda: Real,
) -> (Vec<Real>, Vec<Real>) {
    assert_eq!(rewards.len(), values.len());
    assert_eq!(rewards.len(), dones.len());
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let mask = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 == n { bootstrap_value } else { values[t + 1] };
        let delta = rewards[t] + discount * next_value * mask - values[t];
        gae = delta + discount * lambda * mask * gae;
        advantages[t] = gae;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_step_td_case() {
        let (adv, ret) = compute_gae(&[1.0], &[0.0], &[false], 0.0, 1.0, 1.0);
        assert_eq!(adv, vec![1.0]);
        assert_eq!(ret, vec![1.0]);
    }

    #[test]
    fn lambda_zero_reduces_to_one_step_td_errors() {
        let rewards = [0.5, -0.25, 1.0, 0.0];
        let values = [0.2, 0.4, -0.1, 0.3];
        let dones = [false, false, true, false];
        let bootstrap = 0.7;
        let (adv, _) = compute_gae(&rewards, &values, &dones, bootstrap, 0.9, 0.0);
        for t in 0..rewards.len() {
            let mask = if dones[t] { 0.0 } else { 1.0 };
            let next = if t + 1 == rewards.len() { bootstrap } else { values[t + 1] };
            let delta = rewards[t] + 0.9 * next * mask - values[t];
            assert!((adv[t] - delta).abs() < 1e-12, "t={t}");
        }
    }

    /// Brute-force oracle: advantage at t is the explicit sum
    /// `sum_k (discount*lambda)^k * delta_{t+k}` truncated at episode ends.
    fn direct_sum(
        rewards: &[Real],
        values: &[Real],
        dones: &[bool],
        bootstrap: Real,
        discount: Real,
        lambda: Real,
    ) -> Vec<Real> {
        let n = rewards.len();
        let delta = |t: usize| {
            let mask = if dones[t] { 0.0 } else { 1.0 };
            let next = if t + 1 == n { bootstrap } else { values[t + 1] };
            rewards[t] + discount * next * mask - values[t]
        };
        (0..n)
            .map(|t| {
                let mut acc = 0.0;
                let mut w = 1.0;
                for k in t..n {
                    acc += w * delta(k);
                    if dones[k] {
                        break;
                    }
                    w *= discount * lambda;
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_direct_summation_on_random_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..100 {
            let n = rng.gen_range(1..40);
            let rewards: Vec<Real> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let values: Vec<Real> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dones: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.15)).collect();
            let bootstrap = rng.gen_range(-1.0..1.0);
            let discount = rng.gen_range(0.0..=1.0);
            let lambda = rng.gen_range(0.0..=1.0);
            let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap, discount, lambda);
            let oracle = direct_sum(&rewards, &values, &dones, bootstrap, discount, lambda);
            for t in 0..n {
                assert!((adv[t] - oracle[t]).abs() < 1e-10, "trial {trial}, t={t}");
                assert!((ret[t] - (oracle[t] + values[t])).abs() < 1e-10);
            }
        }
    }
}
