use super::{ParamStore, Scalar};

/// Denominator floor for the relative error: components whose analytic and
/// numeric gradients are both below this magnitude are compared against the
/// floor instead, which keeps central-difference rounding noise (~1e-10 for
/// loss values of order one) from inflating the reported error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-5;

/// Compares an analytic gradient against central finite differences of
/// `loss_fn` over every parameter and returns the worst relative error
/// `|a - n| / max(|a|, |n|, floor)`.
///
/// The caller supplies the analytic gradient so the check stays independent
/// of how it was produced; `loss_fn` must be a pure scalar function of the
/// parameters.
pub fn grad_check<S: Scalar>(
    params: &ParamStore<S>,
    analytic: &[S],
    loss_fn: impl Fn(&ParamStore<S>) -> S,
    epsilon: S,
) -> S {
    assert_eq!(
        analytic.len(),
        params.len(),
        "analytic gradient length must match parameter count"
    );
    assert!(epsilon > S::zero(), "epsilon must be positive");
    let floor = S::from_f64(GRAD_CHECK_FLOOR).unwrap();
    let two = S::from_f64(2.0).unwrap();
    let mut worst = S::zero();
    let mut probe = params.clone();
    for i in 0..params.len() {
        let orig = probe.flat()[i];
        probe.flat_mut()[i] = orig + epsilon;
        let plus = loss_fn(&probe);
        probe.flat_mut()[i] = orig - epsilon;
        let minus = loss_fn(&probe);
        probe.flat_mut()[i] = orig;
        let numeric = (plus - minus) / (two * epsilon);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(floor);
        let rel = (a - numeric).abs() / denom;
        if rel > worst {
            worst = rel;
        }
    }
    worst
}
