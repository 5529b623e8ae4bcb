//! A small trainable 1-layer Transformer classifier.
//!
//! Inputs are bit strings of length `T` followed by a `[CLS]` token. The
//! logits come from a linear readout of the `[CLS]` row. Two architectures are
//! available:
//!
//! - [`Architecture::PreNorm`]: pre-norm block with layer norms, a GeLU MLP,
//!   residual connections, biases and dropout. Scores are scaled by `1/√k`.
//! - [`Architecture::PaperCore`]: embeddings, unscaled multi-head attention,
//!   output projection and readout, nothing else.
//!
//! Gradients are written out by hand in [`model`] and checked against central
//! finite differences in the tests.

pub mod model;
mod params;

pub use model::{cls_attention, example_logits, loss_and_grad, mean_loss, model_forward, predict, Evaluator};
pub use params::{BlockExtras, FeedForward, LayerNorm, Params, TensorMut, TensorRef};

use alloc::format;
use alloc::vec::Vec;

use crate::attention::Activation;
use crate::math;
use crate::rng::{self, ChaCha8Rng};
use crate::{Error, Result};

/// Token ids `0`, `1` and `[CLS]`.
pub const VOCAB: usize = 3;
pub const CLS_TOKEN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    PreNorm,
    PaperCore,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::PreNorm => "pre-norm",
            Architecture::PaperCore => "paper-core",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pre-norm" | "prenorm" | "default" => Ok(Architecture::PreNorm),
            "paper-core" | "core" => Ok(Architecture::PaperCore),
            other => Err(Error::InvalidArgument(format!("unknown architecture '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutRates {
    pub attention: f64,
    pub embedding: f64,
    /// Applied to the attention projection and the MLP output before each residual add.
    pub output: f64,
}

impl DropoutRates {
    pub const NONE: DropoutRates = DropoutRates { attention: 0.0, embedding: 0.0, output: 0.0 };

    pub fn uniform(rate: f64) -> Self {
        Self { attention: rate, embedding: rate, output: rate }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub t: usize,
    pub d: usize,
    pub k: usize,
    pub heads: usize,
    pub architecture: Architecture,
    /// MLP activation of the pre-norm block.
    pub activation: Activation,
    pub dropout: DropoutRates,
    /// Standard deviation of the Gaussian initialization.
    pub init_scale: f64,
}

impl ModelConfig {
    /// `d = 64`, `k = 4`, 16 heads, dropout 0.1 everywhere, `σ_init = 0.02`.
    pub fn standard(t: usize) -> Self {
        Self {
            t,
            d: 64,
            k: 4,
            heads: 16,
            architecture: Architecture::PreNorm,
            activation: Activation::Gelu,
            dropout: DropoutRates::uniform(0.1),
            init_scale: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.d == 0 || self.k == 0 || self.heads == 0 {
            return Err(Error::InvalidArgument("T, d, k and heads must be positive".into()));
        }
        if self.heads * self.k > self.d {
            return Err(Error::InvalidArgument(format!(
                "{} heads of width {} do not fit in d = {}",
                self.heads, self.k, self.d
            )));
        }
        let rates = [self.dropout.attention, self.dropout.embedding, self.dropout.output];
        if rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::InvalidArgument(format!("dropout rates must lie in [0,1), got {rates:?}")));
        }
        if !(self.init_scale > 0.0) || !self.init_scale.is_finite() {
            return Err(Error::InvalidArgument("init scale must be positive".into()));
        }
        Ok(())
    }
}

/// Bit strings of a common length `t` with 0/1 labels, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub t: usize,
    pub bits: Vec<u8>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(t: usize, bits: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        if t == 0 || bits.len() != t * labels.len() {
            return Err(Error::Shape(format!("{} bits do not form {} rows of length {t}", bits.len(), labels.len())));
        }
        if bits.iter().chain(&labels).any(|b| *b > 1) {
            return Err(Error::InvalidArgument("bits and labels must be 0 or 1".into()));
        }
        Ok(Self { t, bits, labels })
    }

    pub fn empty(t: usize) -> Self {
        Self { t, bits: Vec::new(), labels: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.t..(i + 1) * self.t]
    }

    pub fn push(&mut self, row: &[u8], label: u8) {
        debug_assert_eq!(row.len(), self.t);
        self.bits.extend_from_slice(row);
        self.labels.push(label);
    }

    /// Fraction of positive labels.
    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-4 }
    }
}

/// Parameters, Adam moments, step counter and the dropout stream.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub cfg: ModelConfig,
    pub params: Params,
    pub m: Params,
    pub v: Params,
    pub step: u64,
    pub seed: u64,
    rng: ChaCha8Rng,
}

impl TrainState {
    /// Fresh state: parameters from stream `[0]` of `seed`, dropout masks from stream `[1]`.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let params = Params::init(&cfg, &mut rng::stream(seed, &[0]));
        Ok(Self::from_params(cfg, params, seed))
    }

    pub fn from_params(cfg: ModelConfig, params: Params, seed: u64) -> Self {
        let m = params.zeros_like();
        let v = params.zeros_like();
        Self { cfg, params, m, v, step: 0, seed, rng: rng::stream(seed, &[1]) }
    }

    /// Logits for every row; dropout is on exactly when `train_mode` is set.
    pub fn forward(&mut self, data: &Dataset, train_mode: bool) -> Vec<[f64; 2]> {
        let rng = if train_mode { Some(&mut self.rng) } else { None };
        model_forward(&self.params, &self.cfg, data, rng)
    }

    /// Mean cross-entropy and gradient with dropout active.
    pub fn loss_and_grad(&mut self, data: &Dataset) -> (f64, Params) {
        loss_and_grad(&self.params, &self.cfg, data, Some(&mut self.rng))
    }

    /// One Adam update with decoupled weight decay `θ ← θ(1 − η·λ)` applied first.
    pub fn adam_step(&mut self, grads: &Params, opt: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - math::powf(opt.beta1, t as f64);
        let c2 = 1.0 - math::powf(opt.beta2, t as f64);
        let params = self.params.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, m), v), g) in params.into_iter().zip(ms).zip(vs).zip(grads.tensors()) {
            let decay = if p.decay { 1.0 - opt.lr * opt.weight_decay } else { 1.0 };
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = opt.beta1 * m.data[i] + (1.0 - opt.beta1) * gi;
                v.data[i] = opt.beta2 * v.data[i] + (1.0 - opt.beta2) * gi * gi;
                let mhat = m.data[i] / c1;
                let vhat = v.data[i] / c2;
                p.data[i] = p.data[i] * decay - opt.lr * mhat / (math::sqrt(vhat) + opt.eps);
            }
        }
    }

    /// Full-batch step on `data`; returns the (dropout-on) loss before the update.
    pub fn train_step(&mut self, data: &Dataset, opt: &AdamConfig) -> f64 {
        let (loss, grads) = self.loss_and_grad(data);
        self.adam_step(&grads, opt);
        loss
    }

    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator::new(&self.params, &self.cfg, self.cfg.t)
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        self.evaluator().accuracy(data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub max_iters: usize,
    pub eval_every: usize,
    /// Success means best holdout accuracy strictly above this.
    pub target_acc: f64,
    /// Stop as soon as the target is exceeded. The success flag is unaffected.
    pub stop_on_success: bool,
    pub adam: AdamConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { max_iters: 500, eval_every: 10, target_acc: 0.99, stop_on_success: true, adam: AdamConfig::default() }
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub t: usize,
    pub m: usize,
    pub seed: u64,
    pub iters: usize,
    pub best_val_acc: f64,
    pub success: bool,
    pub final_train_acc: f64,
}

/// Full-batch training with holdout evaluation at step 0, every
/// `eval_every` steps and after the last step.
pub fn train_until(state: &mut TrainState, train: &Dataset, holdout: &Dataset, opts: &TrainOptions) -> TrialRecord {
    let every = opts.eval_every.max(1);
    let mut best = state.accuracy(holdout);
    let mut iters = 0;
    let done = |best: f64| opts.stop_on_success && best > opts.target_acc;
    while iters < opts.max_iters && !done(best) {
        state.train_step(train, &opts.adam);
        iters += 1;
        if iters % every == 0 || iters == opts.max_iters {
            best = best.max(state.accuracy(holdout));
        }
    }
    TrialRecord {
        t: train.t,
        m: train.len(),
        seed: state.seed,
        iters,
        best_val_acc: best,
        success: best > opts.target_acc,
        final_train_acc: state.accuracy(train),
    }
}

#[cfg(test)]
mod tests;
