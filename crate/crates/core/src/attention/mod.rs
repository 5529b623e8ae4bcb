//! Forward passes for attention heads, Transformer layers, multi-head sums,
//! the projected deep stack and the scalar `[CLS]` readout.
//!
//! Inputs are `T×d` matrices whose rows are token embeddings. When a `[CLS]`
//! position is used it is the last row.

mod activation;
pub mod audit;
mod generic;

pub use activation::Activation;
pub use generic::{generic_head_forward, GenericHeadSpec};

use alloc::format;
use alloc::vec::Vec;

use crate::numerics::{self, project_rows, row_softmax, softmax, Matrix};
use crate::{Error, Result};

/// How the quadratic score is parameterized.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreWeights {
    /// `W_Q, W_K ∈ ℝ^{d×k}`; the score of key `x` for query `z` is `zᵀ W_Q W_Kᵀ x`.
    Factored { w_q: Matrix, w_k: Matrix },
    /// A single `W_QK ∈ ℝ^{d×d}` standing for `W_Q W_Kᵀ`.
    Fused { w_qk: Matrix },
}

/// Weights of one attention head: score weights, `W_V ∈ ℝ^{d×k}`,
/// `W_C ∈ ℝ^{k×d}`, the activation σ and a readout `w ∈ ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub score: ScoreWeights,
    pub w_v: Matrix,
    pub w_c: Matrix,
    pub activation: Activation,
    pub readout: Vec<f64>,
}

impl AttentionParams {
    /// Factored parameters with a zero readout.
    pub fn factored(w_q: Matrix, w_k: Matrix, w_v: Matrix, w_c: Matrix, activation: Activation) -> Result<Self> {
        let d = w_q.rows();
        let readout = alloc::vec![0.0; d];
        let p = Self { score: ScoreWeights::Factored { w_q, w_k }, w_v, w_c, activation, readout };
        p.validate()?;
        Ok(p)
    }

    /// Fused parameters with a zero readout.
    pub fn fused(w_qk: Matrix, w_v: Matrix, w_c: Matrix, activation: Activation) -> Result<Self> {
        let d = w_qk.rows();
        let readout = alloc::vec![0.0; d];
        let p = Self { score: ScoreWeights::Fused { w_qk }, w_v, w_c, activation, readout };
        p.validate()?;
        Ok(p)
    }

    pub fn with_readout(mut self, w: Vec<f64>) -> Result<Self> {
        if w.len() != self.dim() {
            return Err(Error::Shape(format!("readout has {} entries, model width is {}", w.len(), self.dim())));
        }
        self.readout = w;
        Ok(self)
    }

    /// Model width `d`.
    pub fn dim(&self) -> usize {
        self.w_v.rows()
    }

    /// Value width `k`.
    pub fn value_dim(&self) -> usize {
        self.w_v.cols()
    }

    fn validate(&self) -> Result<()> {
        let d = self.w_v.rows();
        let k = self.w_v.cols();
        match &self.score {
            ScoreWeights::Factored { w_q, w_k } => {
                if w_q.rows() != d || w_k.rows() != d || w_q.cols() != w_k.cols() {
                    return Err(Error::Shape(format!(
                        "W_Q {}x{}, W_K {}x{} incompatible with d={d}",
                        w_q.rows(),
                        w_q.cols(),
                        w_k.rows(),
                        w_k.cols()
                    )));
                }
            }
            ScoreWeights::Fused { w_qk } => {
                if w_qk.shape() != (d, d) {
                    return Err(Error::Shape(format!("W_QK must be {d}x{d}")));
                }
            }
        }
        if self.w_c.shape() != (k, d) {
            return Err(Error::Shape(format!("W_C must be {k}x{d}, got {}x{}", self.w_c.rows(), self.w_c.cols())));
        }
        Ok(())
    }

    /// `W_QK = W_Q W_Kᵀ` (or the fused matrix).
    pub fn w_qk(&self) -> Matrix {
        match &self.score {
            ScoreWeights::Factored { w_q, w_k } => w_q.matmul(&w_k.transpose()),
            ScoreWeights::Fused { w_qk } => w_qk.clone(),
        }
    }

    /// Factored view, or an error for fused parameters.
    pub fn factors(&self) -> Result<(&Matrix, &Matrix)> {
        match &self.score {
            ScoreWeights::Factored { w_q, w_k } => Ok((w_q, w_k)),
            ScoreWeights::Fused { .. } => Err(Error::InvalidArgument(
                "this quantity needs factored W_Q, W_K; parameters are fused".into(),
            )),
        }
    }

    /// Key direction `r = W_QKᵀ z`, so that the score of row `x` is `x · r`.
    pub fn key_direction(&self, query: &[f64]) -> Vec<f64> {
        match &self.score {
            ScoreWeights::Factored { w_q, w_k } => w_k.matvec(&w_q.vecmat(query)),
            ScoreWeights::Fused { w_qk } => w_qk.vecmat(query),
        }
    }

    /// Scores `X W_QKᵀ z`.
    pub fn scores(&self, x: &Matrix, query: &[f64]) -> Vec<f64> {
        x.matvec(&self.key_direction(query))
    }
}

/// `σ(W_Vᵀ Xᵀ softmax(X W_QKᵀ z))`, a vector of length `k`.
pub fn tf_head_forward(x: &Matrix, query: &[f64], params: &AttentionParams) -> Vec<f64> {
    let a = softmax(&params.scores(x, query)).expect("finite scores always have support");
    mix(x, &a, params)
}

fn mix(x: &Matrix, weights: &[f64], params: &AttentionParams) -> Vec<f64> {
    let pooled = x.vecmat(weights);
    params.w_v.vecmat(&pooled).into_iter().map(|v| params.activation.apply(v)).collect()
}

/// Head output mapped back to `ℝ^d` through `W_C`.
pub fn head_output(x: &Matrix, query: &[f64], params: &AttentionParams) -> Vec<f64> {
    params.w_c.vecmat(&tf_head_forward(x, query, params))
}

/// `Y = σ(RowSoftmax(X W_Q (X W_K)ᵀ) X W_V) W_C`.
pub fn tf_layer_forward(x: &Matrix, params: &AttentionParams) -> Matrix {
    let scores = x.matmul(&params.w_qk()).matmul(&x.transpose());
    let a = row_softmax(&scores).expect("finite scores always have support");
    let mixed = a.matmul(x).matmul(&params.w_v).map(|v| params.activation.apply(v));
    mixed.matmul(&params.w_c)
}

/// Sum of `tf_head_forward` over the heads (each head's own output width must agree).
pub fn multi_head_forward(x: &Matrix, heads: &[AttentionParams], query: &[f64]) -> Vec<f64> {
    let mut out: Option<Vec<f64>> = None;
    for h in heads {
        let y = tf_head_forward(x, query, h);
        match out.as_mut() {
            None => out = Some(y),
            Some(acc) => numerics::axpy(1.0, &y, acc),
        }
    }
    out.unwrap_or_default()
}

/// Sum over heads of `W_Cᵀ σ(…)`, landing in `ℝ^d`.
pub fn multi_head_output(x: &Matrix, heads: &[AttentionParams], query: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; x.cols()];
    for h in heads {
        numerics::axpy(1.0, &head_output(x, query, h), &mut out);
    }
    out
}

/// `X + P`; errors on shape mismatch.
pub fn add_positional(x: &Matrix, p: &Matrix) -> Result<Matrix> {
    x.add(p)
}

/// Weights of one layer of the deep stack.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub w_c: Matrix,
}

impl LayerWeights {
    pub fn zeros(d: usize, k: usize) -> Self {
        Self { w_q: Matrix::zeros(d, k), w_k: Matrix::zeros(d, k), w_v: Matrix::zeros(d, k), w_c: Matrix::zeros(k, d) }
    }
}

/// `L ≥ 1` layers sharing width `d`, a readout `w`, the `[CLS]` input row,
/// the activation and an optional residual connection per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct StackParams {
    pub layers: Vec<LayerWeights>,
    pub readout: Vec<f64>,
    pub cls: Vec<f64>,
    pub activation: Activation,
    pub residual: bool,
}

impl StackParams {
    pub fn new(layers: Vec<LayerWeights>, readout: Vec<f64>, cls: Vec<f64>, activation: Activation) -> Result<Self> {
        let s = Self { layers, readout, cls, activation, residual: false };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.readout.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("a stack needs at least one layer".into()));
        }
        let d = self.readout.len();
        if self.cls.len() != d {
            return Err(Error::Shape(format!("CLS row has {} entries, width is {d}", self.cls.len())));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let k = l.w_q.cols();
            let ok = l.w_q.rows() == d
                && l.w_k.shape() == (d, k)
                && l.w_v.rows() == d
                && l.w_c.shape() == (l.w_v.cols(), d);
            if !ok {
                return Err(Error::Shape(format!("layer {i} shapes are inconsistent with width {d}")));
            }
        }
        Ok(())
    }

    /// Append the `[CLS]` row under `x`.
    pub fn append_cls(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = x.clone();
        out.push_row(&self.cls)?;
        Ok(out)
    }
}

/// `f(Z) = RowSoftmax(Z W_Q (Z W_K)ᵀ) Z W_V`, the pre-activation mixing of one layer.
pub fn layer_mixing(z: &Matrix, l: &LayerWeights) -> Matrix {
    let scores = z.matmul(&l.w_q).matmul(&z.matmul(&l.w_k).transpose());
    let a = row_softmax(&scores).expect("finite scores always have support");
    a.matmul(z).matmul(&l.w_v)
}

/// One projected layer: `Π(σ(Π(f(Z))) W_C)` (plus `Z` inside the outer projection when residual).
pub fn deep_layer(z: &Matrix, l: &LayerWeights, activation: Activation, residual: bool) -> Matrix {
    let inner = project_rows(&layer_mixing(z, l)).map(|v| activation.apply(v));
    let mut out = inner.matmul(&l.w_c);
    if residual {
        out = out.add(z).expect("residual keeps the width");
    }
    project_rows(&out)
}

/// Iterate [`deep_layer`] over the stack.
pub fn deep_forward(x: &Matrix, stack: &StackParams) -> Matrix {
    let mut z = x.clone();
    for l in &stack.layers {
        z = deep_layer(&z, l, stack.activation, stack.residual);
    }
    z
}

/// `wᵀ` times the last (`[CLS]`) row of [`deep_forward`].
pub fn scalar_readout(x_with_cls: &Matrix, stack: &StackParams) -> f64 {
    let g = deep_forward(x_with_cls, stack);
    numerics::dot(&stack.readout, g.row(g.rows() - 1))
}

#[cfg(test)]
mod tests;
