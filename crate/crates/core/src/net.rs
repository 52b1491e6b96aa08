//! Minimal feedforward-network engine: parameter storage, batched forward
//! pass, exact reverse-mode gradients, and the squashed-Gaussian policy head.
//!
//! Batches are column-major: a batch of N vectors of dimension D is a D x N
//! matrix, so a layer is one `W * X` GEMM. Everything is f64 and bitwise
//! deterministic; sampling determinism comes from the caller's seeded rng.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::control::Action;
use crate::physics::Vec4;
use crate::{Error, Result};

/// Architecture description: ELU on hidden layers, identity output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl NetSpec {
    pub fn new(input_dim: usize, hidden: &[usize], output_dim: usize) -> Self {
        Self { input_dim, hidden: hidden.to_vec(), output_dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::InvalidParams("network needs at least one hidden layer".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::InvalidParams(format!("zero-width layer in {self:?}")));
        }
        Ok(())
    }

    /// Layer dimensions as (input, output) pairs.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend_from_slice(&self.hidden);
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

pub fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

pub fn elu_grad(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// One affine layer; `weight` is (out x in).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weight: DMatrix::zeros(self.weight.nrows(), self.weight.ncols()),
            bias: DVector::zeros(self.bias.nrows()),
        }
    }
}

/// Multi-layer perceptron with ELU hidden activations and identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: NetSpec,
    pub layers: Vec<Layer>,
}

/// Per-layer parameter gradients, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

impl MlpGrads {
    pub fn zeros(mlp: &Mlp) -> Self {
        Self { layers: mlp.layers.iter().map(Layer::zeros_like).collect() }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weight *= factor;
            l.bias *= factor;
        }
    }

    pub fn add(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.layers.iter().map(|l| l.weight.norm_squared() + l.bias.norm_squared()).sum()
    }
}

/// Cached intermediate values of one batched forward pass.
pub struct ForwardCache {
    /// `inputs[l]` is the input to layer l (`inputs[0]` is the network input).
    pub inputs: Vec<DMatrix<f64>>,
    /// Pre-activation values of each hidden layer.
    pub pre_activations: Vec<DMatrix<f64>>,
    /// Network output (identity head).
    pub output: DMatrix<f64>,
}

impl Mlp {
    /// Orthogonal-style init: semi-orthogonal weight matrices with gain
    /// sqrt(2) on hidden layers and `final_gain` on the output layer; zero
    /// biases.
    pub fn init<R: Rng>(spec: NetSpec, final_gain: f64, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let dims = spec.layer_dims();
        let n_layers = dims.len();
        let layers = dims
            .iter()
            .enumerate()
            .map(|(l, &(din, dout))| {
                let gain = if l + 1 == n_layers { final_gain } else { std::f64::consts::SQRT_2 };
                Layer { weight: orthogonal(dout, din, gain, rng), bias: DVector::zeros(dout) }
            })
            .collect();
        Ok(Self { spec, layers })
    }

    pub fn from_layers(spec: NetSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        let dims = spec.layer_dims();
        if layers.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} layers for {} layer dims",
                layers.len(),
                dims.len()
            )));
        }
        for (layer, &(din, dout)) in layers.iter().zip(&dims) {
            if layer.weight.shape() != (dout, din) || layer.bias.nrows() != dout {
                return Err(Error::DimensionMismatch(format!(
                    "layer shape {:?} does not match ({dout}, {din})",
                    layer.weight.shape()
                )));
            }
        }
        Ok(Self { spec, layers })
    }

    /// Batched forward pass over a (input_dim x batch) matrix.
    pub fn forward_batch(&self, input: &DMatrix<f64>) -> ForwardCache {
        assert_eq!(
            input.nrows(),
            self.spec.input_dim,
            "input rows {} != input_dim {}",
            input.nrows(),
            self.spec.input_dim
        );
        let n_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre_activations = Vec::with_capacity(n_layers - 1);
        let mut x = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weight * &x;
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }
            inputs.push(x);
            if l + 1 == n_layers {
                return ForwardCache { inputs, pre_activations, output: z };
            }
            let a = z.map(elu);
            pre_activations.push(z);
            x = a;
        }
        unreachable!("network has at least one layer");
    }

    /// Single-vector forward pass.
    pub fn forward(&self, input: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(input.nrows(), 1, input.as_slice());
        let out = self.forward_batch(&m).output;
        DVector::from_column_slice(out.as_slice())
    }

    /// Exact reverse-mode gradients of the batched forward map.
    ///
    /// `output_grad` is dLoss/dOutput (output_dim x batch). Returns parameter
    /// gradients (summed over the batch) and the gradient w.r.t. the input.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        output_grad: &DMatrix<f64>,
    ) -> (MlpGrads, DMatrix<f64>) {
        assert_eq!(output_grad.nrows(), self.spec.output_dim, "output_grad rows mismatch");
        assert_eq!(output_grad.ncols(), cache.output.ncols(), "output_grad batch mismatch");
        let mut grads = MlpGrads::zeros(self);
        let mut delta = output_grad.clone();
        for l in (0..self.layers.len()).rev() {
            grads.layers[l].weight = &delta * cache.inputs[l].transpose();
            grads.layers[l].bias =
                DVector::from_iterator(delta.nrows(), delta.row_iter().map(|r| r.sum()));
            let upstream = self.layers[l].weight.transpose() * &delta;
            if l == 0 {
                return (grads, upstream);
            }
            delta = upstream.zip_map(&cache.pre_activations[l - 1], |g, z| g * elu_grad(z));
        }
        unreachable!("network has at least one layer");
    }

    /// In-place update: params += update (caller supplies the signed step).
    pub fn apply_update(&mut self, update: &MlpGrads) {
        for (layer, u) in self.layers.iter_mut().zip(&update.layers) {
            layer.weight += &u.weight;
            layer.bias += &u.bias;
        }
    }

    /// Flat view of all parameters, layer by layer (weight row-major, then
    /// bias). This is the documented checkpoint order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.spec.param_count());
        for layer in &self.layers {
            for r in 0..layer.weight.nrows() {
                for c in 0..layer.weight.ncols() {
                    out.push(layer.weight[(r, c)]);
                }
            }
            out.extend(layer.bias.iter());
        }
        out
    }

    /// Rebuild parameters from [`Mlp::flat_params`] order.
    pub fn from_flat(spec: NetSpec, flat: &[f64]) -> Result<Self> {
        if flat.len() != spec.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                spec.param_count()
            )));
        }
        let mut layers = Vec::new();
        let mut k = 0;
        for (din, dout) in spec.layer_dims() {
            let mut weight = DMatrix::zeros(dout, din);
            for r in 0..dout {
                for c in 0..din {
                    weight[(r, c)] = flat[k];
                    k += 1;
                }
            }
            let bias = DVector::from_column_slice(&flat[k..k + dout]);
            k += dout;
            layers.push(Layer { weight, bias });
        }
        Mlp::from_layers(spec, layers)
    }
}

/// Semi-orthogonal (rows x cols) matrix scaled by `gain`.
fn orthogonal<R: Rng>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> DMatrix<f64> {
    let (big, small, transpose) =
        if rows >= cols { (rows, cols, false) } else { (cols, rows, true) };
    let a = DMatrix::from_fn(big, small, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix the sign ambiguity so the decomposition is canonical.
    for c in 0..small {
        if r[(c, c)] < 0.0 {
            for i in 0..big {
                q[(i, c)] = -q[(i, c)];
            }
        }
    }
    let q = if transpose { q.transpose() } else { q };
    q * gain
}

/// Diagonal-Gaussian policy with a squashed mean and state-independent
/// log-std. The network predicts a raw mean which tanh squashes into (-1, 1);
/// the Gaussian sample around it may exceed the box and is clamped env-side,
/// with the log-probability taken for the unclamped sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub mlp: Mlp,
    pub log_std: DVector<f64>,
}

/// One sampled action plus what training needs to remember about it.
#[derive(Debug, Clone, Copy)]
pub struct PolicySample {
    /// Unclamped Gaussian sample; `log_prob` refers to this vector.
    pub raw_sample: Vec4,
    /// Clamped action handed to the environment.
    pub action: Action,
    pub log_prob: f64,
}

pub const LOG_STD_INIT: f64 = -0.693_147_180_559_945_3; // ln 0.5

impl Policy {
    pub fn init<R: Rng>(spec: NetSpec, rng: &mut R) -> Result<Self> {
        Self::init_with_gain(spec, 0.01, rng)
    }

    /// `final_gain` scales the output layer; at quadrotor scales even tiny
    /// systematic rate outputs integrate into meters of drift, so trainers
    /// start from a much smaller gain than the generic default.
    pub fn init_with_gain<R: Rng>(spec: NetSpec, final_gain: f64, rng: &mut R) -> Result<Self> {
        let mlp = Mlp::init(spec, final_gain, rng)?;
        let log_std = DVector::from_element(mlp.spec.output_dim, LOG_STD_INIT);
        Ok(Self { mlp, log_std })
    }

    pub fn action_dim(&self) -> usize {
        self.mlp.spec.output_dim
    }

    /// Squashed means for a batch of observations (action_dim x batch).
    pub fn mean_batch(&self, obs: &DMatrix<f64>) -> DMatrix<f64> {
        self.mlp.forward_batch(obs).output.map(f64::tanh)
    }

    /// Deterministic action: the squashed mean, clamped.
    pub fn act_mean(&self, obs: &DVector<f64>) -> Action {
        let mean = self.mlp.forward(obs).map(f64::tanh);
        Action(Vec4::from_iterator(mean.iter().cloned())).clamped()
    }

    /// Sample an action for one observation.
    pub fn sample<R: Rng>(&self, obs: &DVector<f64>, rng: &mut R) -> PolicySample {
        let mean = self.mlp.forward(obs).map(f64::tanh);
        self.sample_from_mean(&mean, rng)
    }

    /// Sample given a precomputed squashed mean (the batched rollout path).
    pub fn sample_from_mean<R: Rng>(&self, mean: &DVector<f64>, rng: &mut R) -> PolicySample {
        let dim = self.action_dim();
        assert_eq!(mean.nrows(), dim);
        let mut raw = Vec4::zeros();
        for i in 0..dim {
            let eps: f64 = rng.sample(StandardNormal);
            raw[i] = mean[i] + self.log_std[i].exp() * eps;
        }
        let log_prob = self.log_prob_from_mean(mean, &raw);
        PolicySample { raw_sample: raw, action: Action(raw).clamped(), log_prob }
    }

    /// Gaussian log-density of `sample` around `mean` with the current stds.
    pub fn log_prob_from_mean(&self, mean: &DVector<f64>, sample: &Vec4) -> f64 {
        let mut lp = 0.0;
        for i in 0..self.action_dim() {
            let sigma = self.log_std[i].exp();
            let z = (sample[i] - mean[i]) / sigma;
            lp += -0.5 * z * z - self.log_std[i] - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        lp
    }

    /// Differential entropy of the Gaussian (independent of the state).
    pub fn entropy(&self) -> f64 {
        let half_log_2pi_e = 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
        self.log_std.iter().map(|ls| ls + half_log_2pi_e).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_params_zero_output() {
        let spec = NetSpec::new(3, &[4], 2);
        let layers = spec
            .layer_dims()
            .iter()
            .map(|&(i, o)| Layer { weight: DMatrix::zeros(o, i), bias: DVector::zeros(o) })
            .collect();
        let mlp = Mlp::from_layers(spec, layers).unwrap();
        let out = mlp.forward(&DVector::from_vec(vec![1.0, -2.0, 3.0]));
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_identity_layer_applies_elu() {
        let spec = NetSpec::new(1, &[1], 1);
        let layers = vec![
            Layer { weight: DMatrix::identity(1, 1), bias: DVector::zeros(1) },
            Layer { weight: DMatrix::identity(1, 1), bias: DVector::zeros(1) },
        ];
        let mlp = Mlp::from_layers(spec, layers).unwrap();
        let out = mlp.forward(&DVector::from_vec(vec![-1.0]));
        let expected = (-1.0_f64).exp() - 1.0;
        assert!((out[0] - expected).abs() < 1e-15, "{} vs {expected}", out[0]);
    }

    /// Independent scalar-loop implementation of the forward pass.
    fn forward_by_hand(mlp: &Mlp, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        for (l, layer) in mlp.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.bias.len()];
            for (r, zr) in z.iter_mut().enumerate() {
                let mut acc = layer.bias[r];
                for (c, xc) in x.iter().enumerate() {
                    acc += layer.weight[(r, c)] * xc;
                }
                *zr = acc;
            }
            if l + 1 < mlp.layers.len() {
                for v in &mut z {
                    *v = if *v >= 0.0 { *v } else { v.exp() - 1.0 };
                }
            }
            x = z;
        }
        x
    }

    #[test]
    fn forward_matches_hand_rolled_arithmetic() {
        let mut r = rng(11);
        let spec = NetSpec::new(5, &[7, 6], 3);
        let mlp = Mlp::init(spec, 1.0, &mut r).unwrap();
        for _ in 0..20 {
            let input: Vec<f64> = (0..5).map(|_| r.random_range(-2.0..2.0)).collect();
            let fast = mlp.forward(&DVector::from_vec(input.clone()));
            let slow = forward_by_hand(&mlp, &input);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn batched_forward_matches_single() {
        let mut r = rng(3);
        let spec = NetSpec::new(4, &[8, 8], 2);
        let mlp = Mlp::init(spec, 1.0, &mut r).unwrap();
        let cols: Vec<DVector<f64>> =
            (0..6).map(|_| DVector::from_fn(4, |_, _| r.random_range(-1.0..1.0))).collect();
        let batch = DMatrix::from_columns(&cols);
        let out = mlp.forward_batch(&batch).output;
        // The GEMM kernel may accumulate in a different order than the
        // single-column path; agreement is up to rounding, not bitwise.
        for (j, col) in cols.iter().enumerate() {
            let single = mlp.forward(col);
            for i in 0..2 {
                let (a, b) = (out[(i, j)], single[i]);
                assert!(
                    (a - b).abs() <= 1e-12 * b.abs().max(1.0),
                    "batch/single divergence at ({i},{j}): {a} vs {b}"
                );
            }
        }
    }

    /// Central finite differences on the scalar loss sum(c .* output).
    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng(42);
        let spec = NetSpec::new(8, &[16, 8], 4);
        let mlp = Mlp::init(spec.clone(), 1.0, &mut r).unwrap();
        let input = DMatrix::from_fn(8, 3, |_, _| r.random_range(-1.0..1.0));
        let coeff = DMatrix::from_fn(4, 3, |_, _| r.random_range(-1.0..1.0));

        let cache = mlp.forward_batch(&input);
        let (grads, input_grad) = mlp.backward_batch(&cache, &coeff);

        let loss = |m: &Mlp| (m.forward_batch(&input).output.component_mul(&coeff)).sum();
        let h = 1e-5;
        let mut flat = mlp.flat_params();
        let analytic = MlpGrads { layers: grads.layers };
        let analytic_flat =
            Mlp::from_layers(spec.clone(), analytic.layers).unwrap().flat_params();
        for k in 0..flat.len() {
            let orig = flat[k];
            flat[k] = orig + h;
            let up = loss(&Mlp::from_flat(spec.clone(), &flat).unwrap());
            flat[k] = orig - h;
            let down = loss(&Mlp::from_flat(spec.clone(), &flat).unwrap());
            flat[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let a = analytic_flat[k];
            let denom = fd.abs().max(a.abs()).max(1e-6);
            assert!((fd - a).abs() / denom < 1e-4, "param {k}: fd {fd} vs analytic {a}");
        }
        // Input gradient via FD on one entry.
        let mut shifted = input.clone();
        shifted[(2, 1)] += h;
        let up = (mlp.forward_batch(&shifted).output.component_mul(&coeff)).sum();
        shifted[(2, 1)] -= 2.0 * h;
        let down = (mlp.forward_batch(&shifted).output.component_mul(&coeff)).sum();
        let fd = (up - down) / (2.0 * h);
        assert!((fd - input_grad[(2, 1)]).abs() < 1e-6 * fd.abs().max(1.0));
    }

    #[test]
    fn zero_output_grad_zero_param_grads() {
        let mut r = rng(5);
        let mlp = Mlp::init(NetSpec::new(3, &[4], 2), 1.0, &mut r).unwrap();
        let input = DMatrix::from_fn(3, 2, |_, _| r.random_range(-1.0..1.0));
        let cache = mlp.forward_batch(&input);
        let (grads, input_grad) = mlp.backward_batch(&cache, &DMatrix::zeros(2, 2));
        assert!(grads.squared_norm() == 0.0);
        assert!(input_grad.norm() == 0.0);
    }

    #[test]
    fn backward_linear_in_seed() {
        let mut r = rng(6);
        let mlp = Mlp::init(NetSpec::new(3, &[5], 2), 1.0, &mut r).unwrap();
        let input = DMatrix::from_fn(3, 4, |_, _| r.random_range(-1.0..1.0));
        let seed = DMatrix::from_fn(2, 4, |_, _| r.random_range(-1.0..1.0));
        let cache = mlp.forward_batch(&input);
        let (g1, _) = mlp.backward_batch(&cache, &seed);
        let (g2, _) = mlp.backward_batch(&cache, &(&seed * 2.0));
        for (a, b) in g1.layers.iter().zip(&g2.layers) {
            assert!((&a.weight * 2.0 - &b.weight).norm() < 1e-12);
            assert!((&a.bias * 2.0 - &b.bias).norm() < 1e-12);
        }
    }

    #[test]
    fn flat_params_round_trip() {
        let mut r = rng(9);
        let spec = NetSpec::new(6, &[5, 4], 3);
        let mlp = Mlp::init(spec.clone(), 0.01, &mut r).unwrap();
        let rebuilt = Mlp::from_flat(spec, &mlp.flat_params()).unwrap();
        assert_eq!(mlp, rebuilt);
    }

    #[test]
    fn orthogonal_init_has_orthonormal_columns() {
        let mut r = rng(13);
        let w = orthogonal(16, 8, 1.0, &mut r);
        let gram = w.transpose() * &w;
        for i in 0..8 {
            for j in 0..8 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_variance_returns_squashed_mean() {
        let mut r = rng(21);
        let spec = NetSpec::new(4, &[8], 4);
        let mut policy = Policy::init(spec, &mut r).unwrap();
        policy.log_std = DVector::from_element(4, -10.0);
        let obs = DVector::from_fn(4, |_, _| r.random_range(-1.0..1.0));
        let mean = policy.mlp.forward(&obs).map(f64::tanh);
        let s = policy.sample(&obs, &mut r);
        for i in 0..4 {
            assert!((s.raw_sample[i] - mean[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn log_prob_of_mean_is_analytic_peak() {
        let mut r = rng(22);
        let policy = Policy::init(NetSpec::new(4, &[8], 4), &mut r).unwrap();
        let mean = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.0]);
        let lp = policy.log_prob_from_mean(&mean, &Vec4::new(0.1, -0.2, 0.3, 0.0));
        let expected: f64 = policy
            .log_std
            .iter()
            .map(|ls| -ls - 0.5 * (2.0 * std::f64::consts::PI).ln())
            .sum();
        assert!((lp - expected).abs() < 1e-12);
    }

    #[test]
    fn sample_std_matches_log_std() {
        let mut r = rng(23);
        let spec = NetSpec::new(2, &[4], 4);
        let mut policy = Policy::init(spec, &mut r).unwrap();
        policy.log_std = DVector::zeros(4);
        let mean = DVector::zeros(4);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let s = policy.sample_from_mean(&mean, &mut r);
            sum += s.raw_sample[0];
            sum_sq += s.raw_sample[0] * s.raw_sample[0];
        }
        let mean_emp = sum / n as f64;
        let std_emp = (sum_sq / n as f64 - mean_emp * mean_emp).sqrt();
        assert!((std_emp - 1.0).abs() < 0.02, "empirical std {std_emp}");
    }

    #[test]
    fn entropy_closed_form() {
        let mut r = rng(24);
        let policy = Policy::init(NetSpec::new(2, &[4], 4), &mut r).unwrap();
        let per_dim = LOG_STD_INIT + 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
        assert!((policy.entropy() - 4.0 * per_dim).abs() < 1e-12);
    }

    proptest::proptest! {
        /// ELU is 1-Lipschitz.
        #[test]
        fn elu_is_one_lipschitz(x in -50.0f64..50.0, y in -50.0f64..50.0) {
            proptest::prop_assert!((elu(x) - elu(y)).abs() <= (x - y).abs() + 1e-15);
        }
    }
}
