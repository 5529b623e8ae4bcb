use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::{make_basis, Matrix, NearOrthonormalBasis};
use crate::{math, Error, Result};

/// How a bit string is turned into token rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingVariant {
    /// `X = E_b + P` with a fixed near-orthonormal `P`.
    DeterministicPos,
    /// `X = E_b + P` with `P` chosen by the construction.
    TrainablePos,
    /// Row `t` is `b_t v_t`.
    BagOfVectors,
}

impl EmbeddingVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::DeterministicPos => "deterministic_pos",
            Self::TrainablePos => "trainable_pos",
            Self::BagOfVectors => "bag_of_vectors",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "deterministic_pos" | "deterministic" => Some(Self::DeterministicPos),
            "trainable_pos" | "trainable" => Some(Self::TrainablePos),
            "bag_of_vectors" | "bag" => Some(Self::BagOfVectors),
            _ => None,
        }
    }
}

/// Largest basis overlap ever requested from the sampler.
const BASIS_OVERLAP_CAP: f64 = 0.45;
const DOUBLING_BUDGET: usize = 8;

/// Token embeddings, positional rows and the `[CLS]` row for one context length.
///
/// `e0`, `e1` and `cls` are the last three coordinate axes. `positions` holds
/// `P` for the positional variants and `V` for the bag variant.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMode {
    pub variant: EmbeddingVariant,
    /// The overlap parameter `Δ` that enters `R` and the norm bounds.
    pub delta: f64,
    pub positions: Matrix,
    pub basis: Option<NearOrthonormalBasis>,
    pub seed: u64,
}

impl EmbeddingMode {
    /// Fixed near-orthonormal positions for sparsity `s`.
    ///
    /// `delta` defaults to `1/(2s)`. The sampled basis uses the tighter overlap
    /// `Δ/(1 + (s-1)Δ)`; the head construction needs it to keep the softmax gap
    /// at `R(1 - sΔ)`.
    pub fn deterministic(t: usize, s: usize, delta: Option<f64>, seed: u64) -> Result<Self> {
        let s = s.max(1);
        let delta = delta.unwrap_or(1.0 / (2.0 * s as f64));
        check_delta(delta, s)?;
        let basis = sample_basis(t, basis_overlap(delta, s), seed)?;
        Ok(Self { variant: EmbeddingVariant::DeterministicPos, delta, positions: basis_matrix(&basis), basis: Some(basis), seed })
    }

    /// Bag-of-vectors rows for sparsity `s` at head margin `gamma`; `delta`
    /// defaults to `γ/(2s)` so that `sΔ < γ`.
    pub fn bag(t: usize, s: usize, gamma: f64, delta: Option<f64>, seed: u64) -> Result<Self> {
        let s = s.max(1);
        let delta = delta.unwrap_or(gamma / (2.0 * s as f64));
        check_delta(delta, s)?;
        if !(delta * (s as f64) < gamma) {
            return Err(Error::Precondition(format!("bag embedding needs s*delta < gamma, got {} >= {gamma}", delta * s as f64)));
        }
        let basis = sample_basis(t, basis_overlap(delta, s), seed)?;
        Ok(Self { variant: EmbeddingVariant::BagOfVectors, delta, positions: basis_matrix(&basis), basis: Some(basis), seed })
    }

    /// Trainable positions in width `s + 3`, all zero until a head builder sets them.
    pub fn trainable(t: usize, s: usize) -> Self {
        let d = s.max(1) + 3;
        Self { variant: EmbeddingVariant::TrainablePos, delta: 0.0, positions: Matrix::zeros(t, d), basis: None, seed: 0 }
    }

    pub fn dim(&self) -> usize {
        self.positions.cols()
    }

    pub fn context_len(&self) -> usize {
        self.positions.rows()
    }

    pub fn e0(&self) -> Vec<f64> {
        axis(self.dim(), self.dim() - 3)
    }

    pub fn e1(&self) -> Vec<f64> {
        axis(self.dim(), self.dim() - 2)
    }

    pub fn cls(&self) -> Vec<f64> {
        axis(self.dim(), self.dim() - 1)
    }

    /// Positional (or bag) row `t`.
    pub fn position(&self, t: usize) -> &[f64] {
        self.positions.row(t)
    }
}

pub(crate) fn axis(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}

fn check_delta(delta: f64, s: usize) -> Result<()> {
    if !(delta >= 0.0 && delta * (s as f64) < 1.0) {
        return Err(Error::Precondition(format!("need 0 <= delta < 1/s, got delta = {delta}, s = {s}")));
    }
    Ok(())
}

fn basis_overlap(delta: f64, s: usize) -> f64 {
    (delta / (1.0 + (s as f64 - 1.0) * delta)).min(BASIS_OVERLAP_CAP)
}

/// Sample `t` vectors, starting at width `⌈4 ln t⌉ + 3` and doubling on failure.
fn sample_basis(t: usize, overlap: f64, seed: u64) -> Result<NearOrthonormalBasis> {
    let mut d = (math::ceil(4.0 * math::ln(t.max(1) as f64)) as usize + 3).max(4);
    let mut last = None;
    for _ in 0..=DOUBLING_BUDGET {
        match make_basis(t, d, overlap, seed) {
            Ok(b) => return Ok(b),
            Err(e @ Error::BasisInfeasible { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
        d *= 2;
    }
    Err(last.unwrap_or(Error::BasisInfeasible { count: t, dim: d, delta: overlap }))
}

fn basis_matrix(b: &NearOrthonormalBasis) -> Matrix {
    Matrix::from_fn(b.count(), b.dim(), |i, j| b.vector(i)[j])
}

/// `(T+1) × d` input for bit string `b`; the last row is `v_CLS`.
pub fn embed_boolean(b: &[bool], mode: &EmbeddingMode) -> Result<Matrix> {
    if b.len() > mode.context_len() {
        return Err(Error::InvalidArgument(format!(
            "input length {} exceeds the {} positions of the embedding",
            b.len(),
            mode.context_len()
        )));
    }
    let d = mode.dim();
    let mut x = Matrix::zeros(b.len() + 1, d);
    for (t, &bit) in b.iter().enumerate() {
        let row = x.row_mut(t);
        let p = mode.position(t);
        match mode.variant {
            EmbeddingVariant::BagOfVectors => {
                if bit {
                    row.copy_from_slice(p);
                }
            }
            _ => {
                row.copy_from_slice(p);
                row[d - 3 + bit as usize] += 1.0;
            }
        }
    }
    x.row_mut(b.len())[d - 1] = 1.0;
    Ok(x)
}
