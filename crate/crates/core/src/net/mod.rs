//! Additive coupling-block network with a linear classifier head.
//!
//! A block splits its input into halves `(x1, x2)` by index and computes
//!
//! ```text
//! y2 = x2 + F(x1)        x1 = y1 - G(y2)
//! y1 = x1 + G(y2)        x2 = y2 - F(x1)
//! ```
//!
//! so it is invertible whatever `F` and `G` are. The transform `T` is a stack
//! of such blocks and the classifier is a single hyperplane `<w, z> + b` on the
//! transformed features. Odd input dimensions get one trailing zero feature.

mod train;

pub use train::{train, TrainConfig, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot_unchecked, DenseMatrix};
use crate::rng::SeededRng;

/// Initial bias of the subnet hidden layer.
pub const HIDDEN_BIAS_INIT: f64 = 0.1;

/// Initial bias of the subnet output layer. The output passes through a
/// rectifier; with a zero start and a one- or few-unit output (2-D inputs)
/// the unit goes dead early in training and the block freezes at the identity.
pub const OUTPUT_BIAS_INIT: f64 = 1.0;

/// `FC-ReLU-FC-ReLU` map from `half_dim` to `half_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subnet {
    pub(crate) w1: DenseMatrix,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: DenseMatrix,
    pub(crate) b2: Vec<f64>,
}

/// Intermediate values of one subnet evaluation, kept for reverse mode.
#[derive(Debug, Clone)]
struct SubnetTape {
    input: Vec<f64>,
    pre_hidden: Vec<f64>,
    hidden: Vec<f64>,
    pre_out: Vec<f64>,
}

impl Subnet {
    pub fn new(w1: DenseMatrix, b1: Vec<f64>, w2: DenseMatrix, b2: Vec<f64>) -> Result<Self> {
        let (hidden, half) = (w1.rows(), w1.cols());
        if half == 0 || hidden == 0 {
            return Err(Error::input("subnet dimensions must be positive"));
        }
        check_len(hidden, b1.len())?;
        check_len(half, w2.rows())?;
        check_len(hidden, w2.cols())?;
        check_len(half, b2.len())?;
        if b1.iter().chain(&b2).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("subnet bias".into()));
        }
        Ok(Subnet { w1, b1, w2, b2 })
    }

    /// Subnet whose output is identically zero.
    pub fn zero(half_dim: usize, hidden_dim: usize) -> Self {
        Subnet {
            w1: DenseMatrix::zeros(hidden_dim, half_dim),
            b1: vec![0.0; hidden_dim],
            w2: DenseMatrix::zeros(half_dim, hidden_dim),
            b2: vec![0.0; half_dim],
        }
    }

    /// Subnet whose output is identically `c` (requires `c >= 0`, the output
    /// passes through a rectifier).
    pub fn constant(half_dim: usize, hidden_dim: usize, c: &[f64]) -> Result<Self> {
        check_len(half_dim, c.len())?;
        if c.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::input("constant subnet output must be finite and non-negative"));
        }
        let mut s = Subnet::zero(half_dim, hidden_dim);
        s.b2.copy_from_slice(c);
        Ok(s)
    }

    /// Glorot-uniform weights, biases [`HIDDEN_BIAS_INIT`] and
    /// [`OUTPUT_BIAS_INIT`].
    pub fn random(half_dim: usize, hidden_dim: usize, rng: &mut SeededRng) -> Self {
        let mut s = Subnet::zero(half_dim, hidden_dim);
        let limit = (6.0 / (half_dim + hidden_dim) as f64).sqrt();
        for v in s.w1.values_mut() {
            *v = rng.uniform(-limit, limit);
        }
        for v in s.w2.values_mut() {
            *v = rng.uniform(-limit, limit);
        }
        s.b1.fill(HIDDEN_BIAS_INIT);
        s.b2.fill(OUTPUT_BIAS_INIT);
        s
    }

    pub fn half_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn w1(&self) -> &DenseMatrix {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &DenseMatrix {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.hidden_dim()];
        self.w1.affine_into(x, &self.b1, &mut h);
        relu_in_place(&mut h);
        let mut out = vec![0.0; self.half_dim()];
        self.w2.affine_into(&h, &self.b2, &mut out);
        relu_in_place(&mut out);
        out
    }

    fn eval_taped(&self, x: &[f64]) -> (Vec<f64>, SubnetTape) {
        let mut pre_hidden = vec![0.0; self.hidden_dim()];
        self.w1.affine_into(x, &self.b1, &mut pre_hidden);
        let hidden: Vec<f64> = pre_hidden.iter().map(|&a| relu(a)).collect();
        let mut pre_out = vec![0.0; self.half_dim()];
        self.w2.affine_into(&hidden, &self.b2, &mut pre_out);
        let out = pre_out.iter().map(|&a| relu(a)).collect();
        let tape = SubnetTape {
            input: x.to_vec(),
            pre_hidden,
            hidden,
            pre_out,
        };
        (out, tape)
    }

    /// Pulls `grad_out` back to the subnet input, accumulating parameter
    /// gradients into `grads` when given.
    fn backward(&self, tape: &SubnetTape, grad_out: &[f64], grads: Option<&mut Subnet>) -> Vec<f64> {
        let g_pre_out: Vec<f64> = grad_out
            .iter()
            .zip(&tape.pre_out)
            .map(|(&g, &a)| if a > 0.0 { g } else { 0.0 })
            .collect();
        let mut g_hidden = vec![0.0; self.hidden_dim()];
        self.w2.add_transpose_mul(&g_pre_out, &mut g_hidden);
        let g_pre_hidden: Vec<f64> = g_hidden
            .iter()
            .zip(&tape.pre_hidden)
            .map(|(&g, &a)| if a > 0.0 { g } else { 0.0 })
            .collect();
        let mut g_in = vec![0.0; self.half_dim()];
        self.w1.add_transpose_mul(&g_pre_hidden, &mut g_in);

        if let Some(gr) = grads {
            gr.w2.add_outer(1.0, &g_pre_out, &tape.hidden);
            add_assign(&mut gr.b2, &g_pre_out);
            gr.w1.add_outer(1.0, &g_pre_hidden, &tape.input);
            add_assign(&mut gr.b1, &g_pre_hidden);
        }
        g_in
    }

    fn parameters_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.values_mut(),
            &mut self.b1,
            self.w2.values_mut(),
            &mut self.b2,
        ]
    }

    fn parameters(&self) -> [&[f64]; 4] {
        [self.w1.values(), &self.b1, self.w2.values(), &self.b2]
    }
}

/// One invertible block: `F` updates the second half, `G` the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingBlock {
    pub(crate) f: Subnet,
    pub(crate) g: Subnet,
}

#[derive(Debug, Clone)]
struct BlockTape {
    f: SubnetTape,
    g: SubnetTape,
}

impl CouplingBlock {
    pub fn new(f: Subnet, g: Subnet) -> Result<Self> {
        check_len(f.half_dim(), g.half_dim())?;
        Ok(CouplingBlock { f, g })
    }

    pub fn half_dim(&self) -> usize {
        self.f.half_dim()
    }

    pub fn f(&self) -> &Subnet {
        &self.f
    }

    pub fn g(&self) -> &Subnet {
        &self.g
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(2 * self.half_dim(), x.len())?;
        let (x1, x2) = x.split_at(self.half_dim());
        let y2: Vec<f64> = x2.iter().zip(self.f.eval(x1)).map(|(a, b)| a + b).collect();
        let mut y: Vec<f64> = x1.iter().zip(self.g.eval(&y2)).map(|(a, b)| a + b).collect();
        y.extend_from_slice(&y2);
        Ok(y)
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(2 * self.half_dim(), y.len())?;
        let (y1, y2) = y.split_at(self.half_dim());
        let mut x: Vec<f64> = y1.iter().zip(self.g.eval(y2)).map(|(a, b)| a - b).collect();
        let x2: Vec<f64> = y2.iter().zip(self.f.eval(&x)).map(|(a, b)| a - b).collect();
        x.extend_from_slice(&x2);
        Ok(x)
    }

    fn forward_taped(&self, x: &[f64]) -> (Vec<f64>, BlockTape) {
        let (x1, x2) = x.split_at(self.half_dim());
        let (fx1, f_tape) = self.f.eval_taped(x1);
        let y2: Vec<f64> = x2.iter().zip(&fx1).map(|(a, b)| a + b).collect();
        let (gy2, g_tape) = self.g.eval_taped(&y2);
        let mut y: Vec<f64> = x1.iter().zip(&gy2).map(|(a, b)| a + b).collect();
        y.extend_from_slice(&y2);
        (y, BlockTape { f: f_tape, g: g_tape })
    }

    fn backward(&self, tape: &BlockTape, grad_y: &[f64], grads: Option<&mut CouplingBlock>) -> Vec<f64> {
        let half = self.half_dim();
        let (gy1, gy2) = grad_y.split_at(half);
        let (gf, gg) = match grads {
            Some(b) => (Some(&mut b.f), Some(&mut b.g)),
            None => (None, None),
        };
        // y1 = x1 + G(y2)
        let mut g_y2 = gy2.to_vec();
        add_assign(&mut g_y2, &self.g.backward(&tape.g, gy1, gg));
        // y2 = x2 + F(x1)
        let mut g_x = gy1.to_vec();
        add_assign(&mut g_x, &self.f.backward(&tape.f, &g_y2, gf));
        g_x.extend_from_slice(&g_y2);
        g_x
    }
}

/// Invertible transform plus linear classifier head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvNetModel {
    pub(crate) input_dim: usize,
    pub(crate) padded: bool,
    pub(crate) blocks: Vec<CouplingBlock>,
    pub(crate) w: Vec<f64>,
    pub(crate) b: f64,
}

/// Forward pass intermediates for one sample.
struct Tape {
    blocks: Vec<BlockTape>,
    features: Vec<f64>,
}

impl InvNetModel {
    pub fn new(input_dim: usize, blocks: Vec<CouplingBlock>, w: Vec<f64>, b: f64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::input("input dimension must be positive"));
        }
        if blocks.is_empty() {
            return Err(Error::input("a model needs at least one coupling block"));
        }
        let padded = input_dim % 2 == 1;
        let half = input_dim.div_ceil(2);
        for block in &blocks {
            check_len(half, block.half_dim())?;
        }
        check_len(2 * half, w.len())?;
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("classifier parameters".into()));
        }
        Ok(InvNetModel {
            input_dim,
            padded,
            blocks,
            w,
            b,
        })
    }

    /// Randomly initialized model: see [`Subnet::random`]; classifier weights
    /// uniform in `[-0.01, 0.01]` and zero classifier bias.
    pub fn init(input_dim: usize, num_blocks: usize, hidden_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        if input_dim == 0 || num_blocks == 0 || hidden_dim == 0 {
            return Err(Error::input("input_dim, num_blocks and hidden_dim must be positive"));
        }
        let half = input_dim.div_ceil(2);
        let blocks = (0..num_blocks)
            .map(|_| {
                let f = Subnet::random(half, hidden_dim, rng);
                let g = Subnet::random(half, hidden_dim, rng);
                CouplingBlock { f, g }
            })
            .collect();
        let w = (0..2 * half).map(|_| rng.uniform(-0.01, 0.01)).collect();
        InvNetModel::new(input_dim, blocks, w, 0.0)
    }

    /// Model with all-zero subnets, so `T` is the identity (up to padding).
    pub fn identity(input_dim: usize, num_blocks: usize, hidden_dim: usize, w: Vec<f64>, b: f64) -> Result<Self> {
        let half = input_dim.div_ceil(2);
        let blocks = (0..num_blocks)
            .map(|_| CouplingBlock {
                f: Subnet::zero(half, hidden_dim),
                g: Subnet::zero(half, hidden_dim),
            })
            .collect();
        InvNetModel::new(input_dim, blocks, w, b)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Dimension of the feature domain (`input_dim` rounded up to even).
    pub fn feature_dim(&self) -> usize {
        self.w.len()
    }

    pub fn padded(&self) -> bool {
        self.padded
    }

    pub fn blocks(&self) -> &[CouplingBlock] {
        &self.blocks
    }

    pub fn hidden_dim(&self) -> usize {
        self.blocks[0].f.hidden_dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn bias(&self) -> f64 {
        self.b
    }

    fn pad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_dim, x.len())?;
        let mut v = x.to_vec();
        if self.padded {
            v.push(0.0);
        }
        Ok(v)
    }

    /// `z = T(x)`, in the feature domain (length `feature_dim`).
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.pad(x)?;
        for block in &self.blocks {
            z = block.forward(&z)?;
        }
        Ok(z)
    }

    /// `T⁻¹(z)`, with the padding coordinate dropped for odd input
    /// dimensions.
    pub fn inverse_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.inverse_transform_full(z)?;
        x.truncate(self.input_dim);
        Ok(x)
    }

    /// `T⁻¹(z)` keeping the padding coordinate. For odd input dimensions the
    /// preimage of an arbitrary feature vector need not have a zero there.
    pub fn inverse_transform_full(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.feature_dim(), z.len())?;
        let mut x = z.to_vec();
        for block in self.blocks.iter().rev() {
            x = block.inverse(&x)?;
        }
        Ok(x)
    }

    /// Classifier score `<w, T(x)> + b`.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        let z = self.transform(x)?;
        Ok(self.feature_logit(&z))
    }

    /// Score of a feature-domain point.
    pub fn feature_logit(&self, z: &[f64]) -> f64 {
        dot_unchecked(&self.w, z) + self.b
    }

    /// Class 1 iff the logit is strictly positive.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.logit(x)? > 0.0))
    }

    /// Gradient of the logit with respect to the input.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let tape = self.forward_taped(x)?;
        let mut g = self.backward(&tape, 1.0, None);
        g.truncate(self.input_dim);
        Ok(g)
    }

    fn forward_taped(&self, x: &[f64]) -> Result<Tape> {
        let mut z = self.pad(x)?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, t) = block.forward_taped(&z);
            blocks.push(t);
            z = y;
        }
        Ok(Tape { blocks, features: z })
    }

    /// Reverse pass seeded with `d loss / d logit`; returns the (padded) input
    /// gradient and accumulates parameter gradients into `grads` if given.
    fn backward(&self, tape: &Tape, grad_logit: f64, mut grads: Option<&mut InvNetModel>) -> Vec<f64> {
        if let Some(gr) = grads.as_deref_mut() {
            for (gw, z) in gr.w.iter_mut().zip(&tape.features) {
                *gw += grad_logit * z;
            }
            gr.b += grad_logit;
        }
        let mut g: Vec<f64> = self.w.iter().map(|w| grad_logit * w).collect();
        for (i, block) in self.blocks.iter().enumerate().rev() {
            let block_grads = grads.as_deref_mut().map(|gr| &mut gr.blocks[i]);
            g = block.backward(&tape.blocks[i], &g, block_grads);
        }
        g
    }

    /// Same-shaped model with every parameter zero, used as a gradient buffer.
    fn zeros_like(&self) -> InvNetModel {
        let mut m = self.clone();
        m.for_each_parameter_mut(|p| p.fill(0.0));
        m
    }

    fn for_each_parameter_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for block in &mut self.blocks {
            for p in block.f.parameters_mut() {
                f(p);
            }
            for p in block.g.parameters_mut() {
                f(p);
            }
        }
        f(&mut self.w);
        f(std::slice::from_mut(&mut self.b));
    }

    /// All parameters flattened in a fixed order.
    pub fn parameter_vector(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for block in &self.blocks {
            for p in block.f.parameters().into_iter().chain(block.g.parameters()) {
                out.extend_from_slice(p);
            }
        }
        out.extend_from_slice(&self.w);
        out.push(self.b);
        out
    }

    /// `self -= lr * grads`, walking both models in the same order.
    fn apply_update(&mut self, grads: &InvNetModel, lr: f64) {
        let flat = grads.parameter_vector();
        let mut offset = 0;
        self.for_each_parameter_mut(|p| {
            for v in p.iter_mut() {
                *v -= lr * flat[offset];
                offset += 1;
            }
        });
    }
}

fn relu(a: f64) -> f64 {
    if a > 0.0 {
        a
    } else {
        0.0
    }
}

fn relu_in_place(v: &mut [f64]) {
    for a in v {
        *a = relu(*a);
    }
}

fn add_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

#[cfg(test)]
mod tests;
