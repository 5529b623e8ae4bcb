use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Architecture, ModelConfig, VOCAB};
use crate::numerics::Matrix;

/// Gain and shift of one layer normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Vec<f64>,
    pub shift: Vec<f64>,
}

impl LayerNorm {
    fn new(d: usize) -> Self {
        Self { gain: vec![1.0; d], shift: vec![0.0; d] }
    }

    fn zeros(d: usize) -> Self {
        Self { gain: vec![0.0; d], shift: vec![0.0; d] }
    }
}

/// Two-layer position-wise MLP `d → 4d → d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub w_fc: Matrix,
    pub b_fc: Vec<f64>,
    pub w_proj: Matrix,
    pub b_proj: Vec<f64>,
}

/// Everything the extra block components of the default architecture need.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockExtras {
    pub ln_1: LayerNorm,
    pub ln_2: LayerNorm,
    pub ln_f: LayerNorm,
    pub mlp: FeedForward,
    pub b_q: Vec<f64>,
    pub b_v: Vec<f64>,
    pub b_o: Vec<f64>,
}

/// Trainable parameters. `extras` is `None` in the paper-core architecture.
///
/// Attention weights are stored with all heads side by side: head `h` owns
/// columns `h·k .. (h+1)·k` of `w_q`, `w_k`, `w_v` and rows `h·k .. (h+1)·k`
/// of `w_o`. No key bias is kept: it adds the same amount to every score of a
/// query and cancels in the softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tok: Matrix,
    pub pos: Matrix,
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub w_o: Matrix,
    pub head: Matrix,
    pub extras: Option<BlockExtras>,
}

/// A flat view of one parameter tensor.
pub struct TensorMut<'a> {
    pub name: &'static str,
    pub data: &'a mut [f64],
    /// Whether decoupled weight decay applies (matrix weights of linear maps only).
    pub decay: bool,
}

pub struct TensorRef<'a> {
    pub name: &'static str,
    pub data: &'a [f64],
}

impl Params {
    /// Gaussian initialization: linear weights and embeddings `N(0, σ²)`,
    /// the MLP output projection `N(0, σ²/2)`, biases zero and layer-norm gains one.
    pub fn init(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let (d, hk, n) = (cfg.d, cfg.heads * cfg.k, cfg.t + 1);
        let normal = Normal::new(0.0, cfg.init_scale).expect("init scale is validated");
        let mut gauss = |r: usize, c: usize, scale: f64| Matrix::from_fn(r, c, |_, _| scale * normal.sample(rng));
        let tok = gauss(VOCAB, d, 1.0);
        let pos = gauss(n, d, 1.0);
        let w_q = gauss(d, hk, 1.0);
        let w_k = gauss(d, hk, 1.0);
        let w_v = gauss(d, hk, 1.0);
        let w_o = gauss(hk, d, 1.0);
        let extras = match cfg.architecture {
            Architecture::PaperCore => None,
            Architecture::PreNorm => {
                let w_fc = gauss(d, 4 * d, 1.0);
                let w_proj = gauss(4 * d, d, core::f64::consts::FRAC_1_SQRT_2);
                Some(BlockExtras {
                    ln_1: LayerNorm::new(d),
                    ln_2: LayerNorm::new(d),
                    ln_f: LayerNorm::new(d),
                    mlp: FeedForward { w_fc, b_fc: vec![0.0; 4 * d], w_proj, b_proj: vec![0.0; d] },
                    b_q: vec![0.0; hk],
                    b_v: vec![0.0; hk],
                    b_o: vec![0.0; d],
                })
            }
        };
        let head = gauss(d, 2, 1.0);
        Self { tok, pos, w_q, w_k, w_v, w_o, head, extras }
    }

    /// Same shapes, all entries zero (used for gradients and Adam moments).
    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        let extras = self.extras.as_ref().map(|e| BlockExtras {
            ln_1: LayerNorm::zeros(e.ln_1.gain.len()),
            ln_2: LayerNorm::zeros(e.ln_2.gain.len()),
            ln_f: LayerNorm::zeros(e.ln_f.gain.len()),
            mlp: FeedForward {
                w_fc: z(&e.mlp.w_fc),
                b_fc: vec![0.0; e.mlp.b_fc.len()],
                w_proj: z(&e.mlp.w_proj),
                b_proj: vec![0.0; e.mlp.b_proj.len()],
            },
            b_q: vec![0.0; e.b_q.len()],
            b_v: vec![0.0; e.b_v.len()],
            b_o: vec![0.0; e.b_o.len()],
        });
        Self {
            tok: z(&self.tok),
            pos: z(&self.pos),
            w_q: z(&self.w_q),
            w_k: z(&self.w_k),
            w_v: z(&self.w_v),
            w_o: z(&self.w_o),
            head: z(&self.head),
            extras,
        }
    }

    /// Every tensor in a fixed order.
    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        fn t<'a>(name: &'static str, data: &'a mut [f64], decay: bool) -> TensorMut<'a> {
            TensorMut { name, data, decay }
        }
        let mut out = vec![
            t("tok", self.tok.as_mut_slice(), false),
            t("pos", self.pos.as_mut_slice(), false),
            t("w_q", self.w_q.as_mut_slice(), true),
            t("w_k", self.w_k.as_mut_slice(), true),
            t("w_v", self.w_v.as_mut_slice(), true),
            t("w_o", self.w_o.as_mut_slice(), true),
            t("head", self.head.as_mut_slice(), true),
        ];
        if let Some(e) = self.extras.as_mut() {
            out.extend([
                t("ln_1.gain", &mut e.ln_1.gain[..], false),
                t("ln_1.shift", &mut e.ln_1.shift[..], false),
                t("ln_2.gain", &mut e.ln_2.gain[..], false),
                t("ln_2.shift", &mut e.ln_2.shift[..], false),
                t("ln_f.gain", &mut e.ln_f.gain[..], false),
                t("ln_f.shift", &mut e.ln_f.shift[..], false),
                t("mlp.w_fc", e.mlp.w_fc.as_mut_slice(), true),
                t("mlp.b_fc", &mut e.mlp.b_fc[..], false),
                t("mlp.w_proj", e.mlp.w_proj.as_mut_slice(), true),
                t("mlp.b_proj", &mut e.mlp.b_proj[..], false),
                t("b_q", &mut e.b_q[..], false),
                t("b_v", &mut e.b_v[..], false),
                t("b_o", &mut e.b_o[..], false),
            ]);
        }
        out
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = vec![
            TensorRef { name: "tok", data: self.tok.as_slice() },
            TensorRef { name: "pos", data: self.pos.as_slice() },
            TensorRef { name: "w_q", data: self.w_q.as_slice() },
            TensorRef { name: "w_k", data: self.w_k.as_slice() },
            TensorRef { name: "w_v", data: self.w_v.as_slice() },
            TensorRef { name: "w_o", data: self.w_o.as_slice() },
            TensorRef { name: "head", data: self.head.as_slice() },
        ];
        if let Some(e) = self.extras.as_ref() {
            out.extend([
                TensorRef { name: "ln_1.gain", data: &e.ln_1.gain[..] },
                TensorRef { name: "ln_1.shift", data: &e.ln_1.shift[..] },
                TensorRef { name: "ln_2.gain", data: &e.ln_2.gain[..] },
                TensorRef { name: "ln_2.shift", data: &e.ln_2.shift[..] },
                TensorRef { name: "ln_f.gain", data: &e.ln_f.gain[..] },
                TensorRef { name: "ln_f.shift", data: &e.ln_f.shift[..] },
                TensorRef { name: "mlp.w_fc", data: e.mlp.w_fc.as_slice() },
                TensorRef { name: "mlp.b_fc", data: &e.mlp.b_fc[..] },
                TensorRef { name: "mlp.w_proj", data: e.mlp.w_proj.as_slice() },
                TensorRef { name: "mlp.b_proj", data: &e.mlp.b_proj[..] },
                TensorRef { name: "b_q", data: &e.b_q[..] },
                TensorRef { name: "b_v", data: &e.b_v[..] },
                TensorRef { name: "b_o", data: &e.b_o[..] },
            ]);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// `self += alpha · other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: f64, other: &Params) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, b) in dst.data.iter_mut().zip(src.data) {
                *a += alpha * b;
            }
        }
    }
}
