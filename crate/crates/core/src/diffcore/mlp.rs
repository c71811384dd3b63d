use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DiffError, Scalar, Tensor};

/// Activation functions available to [`MlpSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Silu,
}

impl Activation {
    #[inline]
    pub fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > S::zero() {
                    z
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Silu => z / (S::one() + (-z).exp()),
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    #[inline]
    pub fn derivative<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Identity => S::one(),
            Activation::Relu => {
                if z > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                S::one() - t * t
            }
            Activation::Silu => {
                // d/dz [z·σ(z)] = σ(z)·(1 + z·(1 − σ(z)))
                let s = S::one() / (S::one() + (-z).exp());
                s * (S::one() + z * (S::one() - s))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Silu => "silu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "silu" => Some(Activation::Silu),
            _ => None,
        }
    }
}

/// Shape and activation choices for a dense feed-forward network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    /// Widths from input through hidden layers to output. At least 2 entries.
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self, DiffError> {
        let spec = Self {
            layer_sizes,
            hidden_activation,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DiffError> {
        if self.layer_sizes.len() < 2 {
            return Err(DiffError::InvalidSpec(format!(
                "need at least input and output widths, got {:?}",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.iter().any(|&w| w == 0) {
            return Err(DiffError::InvalidSpec(format!(
                "all layer widths must be >= 1, got {:?}",
                self.layer_sizes
            )));
        }
        if !matches!(
            self.hidden_activation,
            Activation::Silu | Activation::Tanh | Activation::Relu
        ) {
            return Err(DiffError::InvalidSpec(format!(
                "hidden activation must be silu, tanh, or relu, got {}",
                self.hidden_activation.name()
            )));
        }
        if !matches!(
            self.output_activation,
            Activation::Identity | Activation::Tanh
        ) {
            return Err(DiffError::InvalidSpec(format!(
                "output activation must be identity or tanh, got {}",
                self.output_activation.name()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Total number of parameters (weights + biases) for this spec.
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn activation_of_layer(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    w_offset: usize,
    b_offset: usize,
    /// Output width.
    rows: usize,
    /// Input width.
    cols: usize,
}

/// Network parameters: per-layer weight matrices and bias vectors stored in
/// one flat array, so the flattened view used by the optimizer and the
/// structured per-layer view are always consistent by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<S: Scalar> {
    flat: Vec<S>,
    layout: Vec<LayerLayout>,
    rng_seed: u64,
}

impl<S: Scalar> ParamStore<S> {
    fn layout_for(spec: &MlpSpec) -> (Vec<LayerLayout>, usize) {
        let mut layout = Vec::with_capacity(spec.n_layers());
        let mut offset = 0;
        for w in spec.layer_sizes.windows(2) {
            let (cols, rows) = (w[0], w[1]);
            let l = LayerLayout {
                w_offset: offset,
                b_offset: offset + rows * cols,
                rows,
                cols,
            };
            offset = l.b_offset + rows;
            layout.push(l);
        }
        (layout, offset)
    }

    /// Seed-deterministic initialization: weights uniform in
    /// `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`, zero biases.
    pub fn init(spec: &MlpSpec, rng_seed: u64) -> Result<Self, DiffError> {
        spec.validate()?;
        let (layout, total) = Self::layout_for(spec);
        let mut flat = vec![S::zero(); total];
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        for l in &layout {
            let bound = (6.0 / (l.cols + l.rows) as f64).sqrt();
            for w in &mut flat[l.w_offset..l.w_offset + l.rows * l.cols] {
                *w = S::from_f64(rng.gen_range(-bound..=bound)).unwrap();
            }
        }
        Ok(Self {
            flat,
            layout,
            rng_seed,
        })
    }

    /// All-zero parameters with the layout of `spec`.
    pub fn zeros(spec: &MlpSpec) -> Self {
        let (layout, total) = Self::layout_for(spec);
        Self {
            flat: vec![S::zero(); total],
            layout,
            rng_seed: 0,
        }
    }

    /// Rebuilds a store from a flattened parameter vector.
    pub fn from_flat(spec: &MlpSpec, flat: Vec<S>) -> Result<Self, DiffError> {
        let (layout, total) = Self::layout_for(spec);
        if flat.len() != total {
            return Err(DiffError::Dimension {
                context: "ParamStore::from_flat",
                expected: total,
                actual: flat.len(),
            });
        }
        Ok(Self {
            flat,
            layout,
            rng_seed: 0,
        })
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn n_layers(&self) -> usize {
        self.layout.len()
    }

    pub fn flat(&self) -> &[S] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [S] {
        &mut self.flat
    }

    /// Row-major `rows x cols` weight matrix of one layer.
    pub fn weights(&self, layer: usize) -> &[S] {
        let l = self.layout[layer];
        &self.flat[l.w_offset..l.w_offset + l.rows * l.cols]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [S] {
        let l = self.layout[layer];
        &mut self.flat[l.w_offset..l.w_offset + l.rows * l.cols]
    }

    pub fn biases(&self, layer: usize) -> &[S] {
        let l = self.layout[layer];
        &self.flat[l.b_offset..l.b_offset + l.rows]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [S] {
        let l = self.layout[layer];
        &mut self.flat[l.b_offset..l.b_offset + l.rows]
    }

    fn check_matches(&self, spec: &MlpSpec, context: &'static str) -> Result<(), DiffError> {
        let (layout, _) = Self::layout_for(spec);
        if layout != self.layout {
            return Err(DiffError::Dimension {
                context,
                expected: spec.param_count(),
                actual: self.flat.len(),
            });
        }
        Ok(())
    }
}

/// Forward pass. Rank-1 inputs produce rank-1 outputs; rank-2 inputs are
/// mapped row-wise.
pub fn mlp_forward<S: Scalar>(
    spec: &MlpSpec,
    params: &ParamStore<S>,
    input: &Tensor<S>,
) -> Result<Tensor<S>, DiffError> {
    params.check_matches(spec, "mlp_forward params")?;
    if input.last_dim() != spec.input_dim() {
        return Err(DiffError::Dimension {
            context: "mlp_forward input",
            expected: spec.input_dim(),
            actual: input.last_dim(),
        });
    }
    let n = input.n_rows();
    let out_dim = spec.output_dim();
    let mut out = Vec::with_capacity(n * out_dim);
    let mut buf_a = Vec::new();
    let mut buf_b = Vec::new();
    for r in 0..n {
        forward_row(spec, params, input.row(r), &mut buf_a, &mut buf_b);
        out.extend_from_slice(&buf_a);
    }
    Ok(input.with_rows(out_dim, out))
}

/// Computes one row through all layers; the final activations end in `cur`.
fn forward_row<S: Scalar>(
    spec: &MlpSpec,
    params: &ParamStore<S>,
    input: &[S],
    cur: &mut Vec<S>,
    next: &mut Vec<S>,
) {
    cur.clear();
    cur.extend_from_slice(input);
    for layer in 0..spec.n_layers() {
        let act = spec.activation_of_layer(layer);
        let w = params.weights(layer);
        let b = params.biases(layer);
        let (rows, cols) = (b.len(), cur.len());
        next.clear();
        for i in 0..rows {
            let mut z = b[i];
            let wrow = &w[i * cols..(i + 1) * cols];
            for (wv, xv) in wrow.iter().zip(cur.iter()) {
                z += *wv * *xv;
            }
            next.push(act.apply(z));
        }
        std::mem::swap(cur, next);
    }
}

/// Per-row cache of pre-activations for the backward pass.
struct ForwardCache<S> {
    /// `zs[l]` holds the pre-activations of layer `l` for every row.
    zs: Vec<Vec<S>>,
    /// `acts[l]` holds the activations entering layer `l` (acts[0] = input).
    acts: Vec<Vec<S>>,
}

fn forward_with_cache<S: Scalar>(
    spec: &MlpSpec,
    params: &ParamStore<S>,
    input: &Tensor<S>,
) -> ForwardCache<S> {
    let n = input.n_rows();
    let n_layers = spec.n_layers();
    let mut zs: Vec<Vec<S>> = (0..n_layers)
        .map(|l| Vec::with_capacity(n * spec.layer_sizes[l + 1]))
        .collect();
    let mut acts: Vec<Vec<S>> = (0..n_layers)
        .map(|l| Vec::with_capacity(n * spec.layer_sizes[l]))
        .collect();
    for r in 0..n {
        let mut cur = input.row(r).to_vec();
        for layer in 0..n_layers {
            acts[layer].extend_from_slice(&cur);
            let act = spec.activation_of_layer(layer);
            let w = params.weights(layer);
            let b = params.biases(layer);
            let (rows, cols) = (b.len(), cur.len());
            let mut out = Vec::with_capacity(rows);
            for i in 0..rows {
                let mut z = b[i];
                let wrow = &w[i * cols..(i + 1) * cols];
                for (wv, xv) in wrow.iter().zip(cur.iter()) {
                    z += *wv * *xv;
                }
                zs[layer].push(z);
                out.push(act.apply(z));
            }
            cur = out;
        }
    }
    ForwardCache { zs, acts }
}

/// Exact analytic gradients of `<upstream_grad, output>` with respect to the
/// parameters and the input. Gradients over a batch are summed across rows.
pub fn mlp_backward<S: Scalar>(
    spec: &MlpSpec,
    params: &ParamStore<S>,
    input: &Tensor<S>,
    upstream_grad: &Tensor<S>,
) -> Result<(ParamStore<S>, Tensor<S>), DiffError> {
    params.check_matches(spec, "mlp_backward params")?;
    if input.last_dim() != spec.input_dim() {
        return Err(DiffError::Dimension {
            context: "mlp_backward input",
            expected: spec.input_dim(),
            actual: input.last_dim(),
        });
    }
    if upstream_grad.last_dim() != spec.output_dim() || upstream_grad.n_rows() != input.n_rows() {
        return Err(DiffError::Dimension {
            context: "mlp_backward upstream",
            expected: input.n_rows() * spec.output_dim(),
            actual: upstream_grad.len(),
        });
    }

    let cache = forward_with_cache(spec, params, input);
    let n = input.n_rows();
    let n_layers = spec.n_layers();
    let mut grads = ParamStore::zeros(spec);
    let mut input_grad = vec![S::zero(); input.len()];

    for r in 0..n {
        // delta = dLoss/dz of the current layer, walked backwards.
        let out_dim = spec.output_dim();
        let act = spec.activation_of_layer(n_layers - 1);
        let z_last = &cache.zs[n_layers - 1][r * out_dim..(r + 1) * out_dim];
        let mut delta: Vec<S> = upstream_grad
            .row(r)
            .iter()
            .zip(z_last.iter())
            .map(|(g, z)| *g * act.derivative(*z))
            .collect();

        for layer in (0..n_layers).rev() {
            let cols = spec.layer_sizes[layer];
            let rows = spec.layer_sizes[layer + 1];
            let a_in = &cache.acts[layer][r * cols..(r + 1) * cols];
            {
                let gw = grads.weights_mut(layer);
                for i in 0..rows {
                    let di = delta[i];
                    let grow = &mut gw[i * cols..(i + 1) * cols];
                    for (g, a) in grow.iter_mut().zip(a_in.iter()) {
                        *g += di * *a;
                    }
                }
            }
            {
                let gb = grads.biases_mut(layer);
                for (g, d) in gb.iter_mut().zip(delta.iter()) {
                    *g += *d;
                }
            }
            // Propagate to the previous layer (or the input).
            let w = params.weights(layer);
            let mut prev = vec![S::zero(); cols];
            for i in 0..rows {
                let di = delta[i];
                let wrow = &w[i * cols..(i + 1) * cols];
                for (p, wv) in prev.iter_mut().zip(wrow.iter()) {
                    *p += di * *wv;
                }
            }
            if layer > 0 {
                let act = spec.activation_of_layer(layer - 1);
                let z_prev = &cache.zs[layer - 1][r * cols..(r + 1) * cols];
                delta = prev
                    .iter()
                    .zip(z_prev.iter())
                    .map(|(p, z)| *p * act.derivative(*z))
                    .collect();
            } else {
                for (ig, p) in input_grad[r * cols..(r + 1) * cols].iter_mut().zip(prev) {
                    *ig = p;
                }
            }
        }
    }

    let input_grad = input.with_rows(spec.input_dim(), input_grad);
    Ok((grads, input_grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_1_1() -> MlpSpec {
        MlpSpec::new(vec![1, 1], Activation::Silu, Activation::Identity).unwrap()
    }

    #[test]
    fn zero_params_give_zero_output() {
        let spec = MlpSpec::new(vec![3, 4, 2], Activation::Tanh, Activation::Identity).unwrap();
        let params = ParamStore::zeros(&spec);
        let input = Tensor::vector(vec![0.3, -0.7, 1.1]).unwrap();
        let out = mlp_forward(&spec, &params, &input).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0]);
    }

    #[test]
    fn affine_identity_case() {
        // 1 -> 1 network, weight=2, bias=1, input 3 => 7.
        let spec = spec_1_1();
        let mut params = ParamStore::zeros(&spec);
        params.weights_mut(0)[0] = 2.0;
        params.biases_mut(0)[0] = 1.0;
        let out = mlp_forward(&spec, &params, &Tensor::vector(vec![3.0]).unwrap()).unwrap();
        assert_eq!(out.data(), &[7.0]);
    }

    #[test]
    fn tanh_output_stays_in_open_interval() {
        let spec = MlpSpec::new(vec![4, 8, 5], Activation::Silu, Activation::Tanh).unwrap();
        let params = ParamStore::<f64>::init(&spec, 42).unwrap();
        let input = Tensor::vector(vec![10.0, -10.0, 3.0, 0.5]).unwrap();
        let out = mlp_forward(&spec, &params, &input).unwrap();
        assert!(out.data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn batched_forward_matches_per_row() {
        let spec = MlpSpec::new(vec![3, 5, 2], Activation::Silu, Activation::Tanh).unwrap();
        let params = ParamStore::init(&spec, 7).unwrap();
        let rows = [
            vec![0.1, 0.2, 0.3],
            vec![-1.0, 0.0, 1.0],
            vec![2.0, -2.0, 0.5],
        ];
        let batch = Tensor::matrix(3, 3, rows.concat()).unwrap();
        let b_out = mlp_forward(&spec, &params, &batch).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let single = Tensor::vector(row.clone()).unwrap();
            let s_out = mlp_forward(&spec, &params, &single).unwrap();
            assert_eq!(b_out.row(i), s_out.data());
        }
    }

    #[test]
    fn forward_shape_mismatch_reports_dims() {
        let spec = MlpSpec::new(vec![3, 2], Activation::Tanh, Activation::Identity).unwrap();
        let params = ParamStore::zeros(&spec);
        let input = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let err = mlp_forward(&spec, &params, &input).unwrap_err();
        assert_eq!(
            err,
            DiffError::Dimension {
                context: "mlp_forward input",
                expected: 3,
                actual: 2
            }
        );
    }

    #[test]
    fn backward_zero_upstream_gives_zero_grads() {
        let spec = MlpSpec::new(vec![3, 4, 2], Activation::Silu, Activation::Tanh).unwrap();
        let params = ParamStore::init(&spec, 1).unwrap();
        let input = Tensor::vector(vec![0.5, -0.5, 0.25]).unwrap();
        let upstream = Tensor::vector(vec![0.0, 0.0]).unwrap();
        let (grads, input_grad) = mlp_backward(&spec, &params, &input, &upstream).unwrap();
        assert!(grads.flat().iter().all(|g| *g == 0.0));
        assert!(input_grad.data().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn backward_affine_derivatives() {
        // 1 -> 1 identity net: d<1, wx+b>/dw = x, /db = 1.
        let spec = spec_1_1();
        let mut params = ParamStore::zeros(&spec);
        params.weights_mut(0)[0] = 0.7;
        let input = Tensor::vector(vec![3.5]).unwrap();
        let upstream = Tensor::vector(vec![1.0]).unwrap();
        let (grads, input_grad) = mlp_backward(&spec, &params, &input, &upstream).unwrap();
        assert_eq!(grads.weights(0), &[3.5]);
        assert_eq!(grads.biases(0), &[1.0]);
        assert_eq!(input_grad.data(), &[0.7]);
    }

    #[test]
    fn init_is_seed_deterministic_and_in_bounds() {
        let spec = MlpSpec::new(vec![6, 4, 3], Activation::Relu, Activation::Identity).unwrap();
        let a = ParamStore::<f64>::init(&spec, 99).unwrap();
        let b = ParamStore::<f64>::init(&spec, 99).unwrap();
        let c = ParamStore::<f64>::init(&spec, 100).unwrap();
        assert_eq!(a.flat(), b.flat());
        assert_ne!(a.flat(), c.flat());
        let bound0 = (6.0f64 / (6 + 4) as f64).sqrt();
        assert!(a.weights(0).iter().all(|w| w.abs() <= bound0));
        assert!(a.biases(0).iter().all(|b| *b == 0.0));
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::new(vec![3], Activation::Tanh, Activation::Identity).is_err());
        assert!(MlpSpec::new(vec![3, 0], Activation::Tanh, Activation::Identity).is_err());
        assert!(MlpSpec::new(vec![3, 2], Activation::Identity, Activation::Identity).is_err());
        assert!(MlpSpec::new(vec![3, 2], Activation::Tanh, Activation::Silu).is_err());
    }
}
