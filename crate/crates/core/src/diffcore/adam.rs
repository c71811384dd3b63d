use super::{DiffError, Scalar};

/// Hyperparameters of the adaptive-moment optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper<S> {
    pub step_size: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
}

impl<S: Scalar> AdamHyper<S> {
    pub fn with_step_size(step_size: S) -> Self {
        Self {
            step_size,
            beta1: S::from_f64(0.9).unwrap(),
            beta2: S::from_f64(0.999).unwrap(),
            epsilon: S::from_f64(1e-8).unwrap(),
        }
    }
}

impl<S: Scalar> Default for AdamHyper<S> {
    fn default() -> Self {
        Self::with_step_size(S::from_f64(1e-3).unwrap())
    }
}

/// Optimizer state: first and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    m: Vec<S>,
    v: Vec<S>,
    step: u64,
    pub hyper: AdamHyper<S>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(param_count: usize, hyper: AdamHyper<S>) -> Self {
        Self {
            m: vec![S::zero(); param_count],
            v: vec![S::zero(); param_count],
            step: 0,
            hyper,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[S] {
        &self.m
    }

    pub fn second_moment(&self) -> &[S] {
        &self.v
    }
}

/// One bias-corrected adaptive-moment update. Pure: returns the new
/// parameter vector and state. A non-finite gradient entry aborts the update
/// with an error and nothing is consumed or changed.
pub fn adam_step<S: Scalar>(
    params: &[S],
    grads: &[S],
    state: &AdamState<S>,
) -> Result<(Vec<S>, AdamState<S>), DiffError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(DiffError::Dimension {
            context: "adam_step",
            expected: params.len(),
            actual: grads.len(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(DiffError::NonFinite {
            context: "adam_step gradients",
        });
    }
    let h = state.hyper;
    let step = state.step + 1;
    let one = S::one();
    let bc1 = one - h.beta1.powi(step as i32);
    let bc2 = one - h.beta2.powi(step as i32);

    let mut new_params = Vec::with_capacity(params.len());
    let mut m = Vec::with_capacity(params.len());
    let mut v = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let g = grads[i];
        let mi = h.beta1 * state.m[i] + (one - h.beta1) * g;
        let vi = h.beta2 * state.v[i] + (one - h.beta2) * g * g;
        let m_hat = mi / bc1;
        let v_hat = vi / bc2;
        new_params.push(params[i] - h.step_size * m_hat / (v_hat.sqrt() + h.epsilon));
        m.push(mi);
        v.push(vi);
    }
    Ok((
        new_params,
        AdamState {
            m,
            v,
            step,
            hyper: h,
        },
    ))
}
