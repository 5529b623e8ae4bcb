use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::embedding::{axis, embed_boolean, EmbeddingMode, EmbeddingVariant};
use super::pipeline::NormCertificate;
use crate::attention::{multi_head_output, Activation, AttentionParams};
use crate::numerics::{self, matrix_norm_pq, Lp, Matrix};
use crate::{math, Error, Result};

/// What a head construction approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadTarget {
    /// Scalar strictly monotone symmetric function, read at output coordinate 0.
    Monotone,
    /// Injective `ℝ^s`-valued function, read at output coordinates `0..s`.
    Injective,
}

/// Attention weights compiled for one index set, together with the embedding
/// they expect and the certificates of their norms.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadConstruction {
    pub target: HeadTarget,
    pub index_set: Vec<usize>,
    pub embedding: EmbeddingMode,
    pub heads: Vec<AttentionParams>,
    /// Margin `γ` the construction was built for; outputs are within `γ/4` of the target.
    pub gamma: f64,
    /// Query scale `R`.
    pub r: f64,
    pub certificates: Vec<NormCertificate>,
}

impl HeadConstruction {
    pub fn variant(&self) -> EmbeddingVariant {
        self.embedding.variant
    }

    pub fn sparsity(&self) -> usize {
        self.index_set.len()
    }

    pub fn output_dim(&self) -> usize {
        match self.target {
            HeadTarget::Monotone => 1,
            HeadTarget::Injective => self.sparsity(),
        }
    }

    /// Summed head outputs on `X(b)` with the `[CLS]` row as query, projected to the target coordinates.
    pub fn output(&self, b: &[bool]) -> Result<Vec<f64>> {
        let x = embed_boolean(b, &self.embedding)?;
        let query = self.embedding.cls();
        let mut y = multi_head_output(&x, &self.heads, &query);
        y.truncate(self.output_dim());
        Ok(y)
    }

    /// The exact function being approximated.
    pub fn target_value(&self, b: &[bool]) -> Vec<f64> {
        let s = self.sparsity();
        let bits: Vec<bool> = self.index_set.iter().map(|&i| b[i]).collect();
        let r = bits.iter().filter(|&&x| x).count() as f64;
        let chi = |x: bool| if x { -1.0 } else { 1.0 };
        let bag = self.variant() == EmbeddingVariant::BagOfVectors;
        match (self.target, bag) {
            (HeadTarget::Monotone, false) => vec![bits.iter().map(|&x| chi(x)).sum::<f64>() / s as f64],
            (HeadTarget::Monotone, true) => vec![(r - s as f64) / (r + 1.0)],
            (HeadTarget::Injective, false) => bits.iter().map(|&x| chi(x)).collect(),
            (HeadTarget::Injective, true) => bits.iter().map(|&x| (x as u8 as f64 - 1.0) / (r + 1.0)).collect(),
        }
    }

    /// Strict monotonicity (or injectivity) constant of the target.
    pub fn target_separation(&self) -> f64 {
        target_separation(self.target, self.variant(), self.sparsity())
    }

    /// Bound on `‖target‖_∞`.
    pub fn target_bound(&self) -> f64 {
        match (self.target, self.variant()) {
            (HeadTarget::Monotone, EmbeddingVariant::BagOfVectors) => self.sparsity() as f64,
            _ => 1.0,
        }
    }
}

pub(crate) fn target_separation(target: HeadTarget, variant: EmbeddingVariant, s: usize) -> f64 {
    let s = s as f64;
    match (target, variant) {
        (_, EmbeddingVariant::BagOfVectors) => 1.0 / s,
        (HeadTarget::Monotone, _) => 2.0 / s,
        (HeadTarget::Injective, _) => 2.0,
    }
}

fn validate(index_set: &[usize], gamma: f64, mode: &EmbeddingMode) -> Result<()> {
    let t = mode.context_len();
    let s = index_set.len();
    if s == 0 {
        return Err(Error::InvalidArgument("index set is empty".into()));
    }
    if index_set.windows(2).any(|w| w[0] >= w[1]) || index_set[s - 1] >= t {
        return Err(Error::InvalidArgument(format!("index set must be strictly increasing and below T = {t}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Precondition(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    match mode.variant {
        EmbeddingVariant::TrainablePos => {
            if mode.dim() < s + 3 {
                return Err(Error::Precondition(format!("trainable width {} is below s + 3 = {}", mode.dim(), s + 3)));
            }
        }
        _ => {
            if !(mode.delta * (s as f64) < 1.0) {
                return Err(Error::Precondition(format!("delta < 1/s violated: delta = {}, s = {s}", mode.delta)));
            }
            if mode.dim() - 3 < s {
                return Err(Error::Precondition("embedding width is below s + 3".into()));
            }
        }
    }
    if mode.variant == EmbeddingVariant::BagOfVectors && !(mode.delta * (s as f64) < gamma) {
        return Err(Error::Precondition(format!("bag construction needs s*delta < gamma, got {} >= {gamma}", mode.delta * s as f64)));
    }
    Ok(())
}

/// Query scale for the variant.
fn query_scale(variant: EmbeddingVariant, t: usize, s: usize, gamma: f64, delta: f64) -> f64 {
    let (t, s) = (t as f64, s as f64);
    match variant {
        EmbeddingVariant::DeterministicPos => math::ln(8.0 * t / gamma) / (1.0 - s * delta),
        EmbeddingVariant::TrainablePos => math::ln(8.0 * t / gamma),
        EmbeddingVariant::BagOfVectors => math::ln(8.0 * t * s * (1.0 + delta) / (gamma - s * delta)) / (1.0 - s * delta),
    }
}

/// Biorthogonal partners `u_j` of the vectors `v_j`: `u_j · v_i = [i = j]`,
/// each `u_j` in the span of the `v`. Orthonormal inputs are returned unchanged.
fn dual_system(vectors: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let s = vectors.len();
    let gram = Matrix::from_fn(s, s, |i, j| numerics::dot(vectors[i], vectors[j]));
    let inv = invert(&gram)?;
    let d = vectors[0].len();
    Ok((0..s)
        .map(|j| {
            let mut u = vec![0.0; d];
            for (k, v) in vectors.iter().enumerate() {
                numerics::axpy(inv[(j, k)], v, &mut u);
            }
            u
        })
        .collect())
}

/// Gauss-Jordan inverse with partial pivoting for the small Gram matrices above.
fn invert(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs())).unwrap_or(c);
        if a[(p, c)].abs() < 1e-12 {
            return Err(Error::Precondition("Gram matrix of the relevant positions is singular".into()));
        }
        swap_rows(&mut a, p, c);
        swap_rows(&mut inv, p, c);
        let pivot = a[(c, c)];
        a.row_mut(c).iter_mut().for_each(|x| *x /= pivot);
        inv.row_mut(c).iter_mut().for_each(|x| *x /= pivot);
        for r in 0..n {
            if r != c {
                let f = a[(r, c)];
                if f != 0.0 {
                    let (ar, ir) = (a.row(c).to_vec(), inv.row(c).to_vec());
                    numerics::axpy(-f, &ar, a.row_mut(r));
                    numerics::axpy(-f, &ir, inv.row_mut(r));
                }
            }
        }
    }
    Ok(inv)
}

fn swap_rows(m: &mut Matrix, i: usize, j: usize) {
    if i != j {
        let (ri, rj) = (m.row(i).to_vec(), m.row(j).to_vec());
        m.row_mut(i).copy_from_slice(&rj);
        m.row_mut(j).copy_from_slice(&ri);
    }
}

/// `u vᵀ` as a `len(u) × len(v)` matrix.
fn outer(u: &[f64], v: &[f64]) -> Matrix {
    Matrix::outer(u, v)
}

fn sum_outer(pairs: impl IntoIterator<Item = (Vec<f64>, Vec<f64>)>, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for (u, v) in pairs {
        m = m.add(&outer(&u, &v)).expect("shapes agree");
    }
    m
}

fn head(w_q: Matrix, w_k: Matrix, w_v: Matrix, w_c: Matrix) -> AttentionParams {
    AttentionParams::factored(w_q, w_k, w_v, w_c, Activation::Identity).expect("construction shapes are consistent")
}

fn cert(name: impl Into<alloc::string::String>, measured: f64, bound: f64) -> NormCertificate {
    NormCertificate::new(name, measured, bound)
}

fn head_certificates(prefix: &str, h: &AttentionParams, bounds: [f64; 4]) -> Vec<NormCertificate> {
    let (w_q, w_k) = h.factors().expect("constructions are factored");
    vec![
        cert(format!("{prefix}W_Q frobenius"), w_q.frobenius(), bounds[0]),
        cert(format!("{prefix}W_K frobenius"), w_k.frobenius(), bounds[1]),
        cert(format!("{prefix}W_V frobenius"), h.w_v.frobenius(), bounds[2]),
        cert(format!("{prefix}W_C frobenius"), h.w_c.frobenius(), bounds[3]),
    ]
}

/// Single head whose output coordinate 0 approximates a strictly monotone symmetric target within `γ/4`.
///
/// Positional variants target `(1/s) Σ_{i∈I} χ_i` with `χ_i = +1` iff `b_i = 0`;
/// the bag variant targets `(r - s)/(r + 1)` with `r` the relevant popcount.
pub fn build_monotone_head(index_set: &[usize], gamma: f64, mode: &EmbeddingMode) -> Result<HeadConstruction> {
    validate(index_set, gamma, mode)?;
    let (t, s, d, k) = (mode.context_len(), index_set.len(), mode.dim(), index_set.len());
    let r = query_scale(mode.variant, t, s, gamma, mode.delta);
    let k1 = axis(k, 0);
    let cls = mode.cls();
    let w_q = outer(&cls.iter().map(|v| r * v).collect::<Vec<_>>(), &k1);
    let mut embedding = mode.clone();
    let (params, bounds) = match mode.variant {
        EmbeddingVariant::DeterministicPos | EmbeddingVariant::TrainablePos => {
            let key = if mode.variant == EmbeddingVariant::TrainablePos {
                for &i in index_set {
                    embedding.positions.row_mut(i).copy_from_slice(&axis(d, 0));
                }
                axis(d, 0)
            } else {
                let rows: Vec<&[f64]> = index_set.iter().map(|&i| mode.position(i)).collect();
                dual_system(&rows)?.into_iter().fold(vec![0.0; d], |mut acc, u| {
                    numerics::axpy(1.0, &u, &mut acc);
                    acc
                })
            };
            let value = numerics::sub(&mode.e0(), &mode.e1());
            let h = head(w_q, outer(&key, &k1), outer(&value, &k1), outer(&k1, &axis(d, 0)));
            let w_k_bound = if mode.variant == EmbeddingVariant::TrainablePos { 1.0 } else { s as f64 };
            (h, [r, w_k_bound, 2.0, 1.0])
        }
        EmbeddingVariant::BagOfVectors => {
            let h = bag_head(index_set, mode, w_q, HeadTarget::Monotone)?;
            let s = s as f64;
            (h, [r, s + 1.0, 2.0 * s, s])
        }
    };
    let params = params.with_readout(axis(d, 0))?;
    let mut certificates = head_certificates("", &params, bounds);
    if mode.variant == EmbeddingVariant::TrainablePos {
        certificates.push(positional_certificate(&embedding, s));
    }
    Ok(HeadConstruction {
        target: HeadTarget::Monotone,
        index_set: index_set.to_vec(),
        embedding,
        heads: vec![params],
        gamma,
        r,
        certificates,
    })
}

fn positional_certificate(mode: &EmbeddingMode, s: usize) -> NormCertificate {
    cert("P^T (2,1)", matrix_norm_pq(&mode.positions.transpose(), Lp::Two, Lp::One), s as f64)
}

/// Bag head: key `u_Σ + v_CLS`, values `Σ_j u_j e_jᵀ - v_CLS (Σ_j e_j)ᵀ`.
fn bag_head(index_set: &[usize], mode: &EmbeddingMode, w_q: Matrix, target: HeadTarget) -> Result<AttentionParams> {
    let (s, d) = (index_set.len(), mode.dim());
    let rows: Vec<&[f64]> = index_set.iter().map(|&i| mode.position(i)).collect();
    let duals = dual_system(&rows)?;
    let cls = mode.cls();
    let mut key = cls.clone();
    for u in &duals {
        numerics::axpy(1.0, u, &mut key);
    }
    let w_k = outer(&key, &axis(s, 0));
    let ones = vec![1.0; s];
    let neg_cls: Vec<f64> = cls.iter().map(|v| -v).collect();
    let w_v = sum_outer(duals.iter().enumerate().map(|(j, u)| (u.clone(), axis(s, j))), d, s).add(&outer(&neg_cls, &ones))?;
    let w_c = match target {
        HeadTarget::Monotone => sum_outer((0..s).map(|j| (axis(s, j), axis(d, 0))), s, d),
        HeadTarget::Injective => sum_outer((0..s).map(|j| (axis(s, j), axis(d, j))), s, d),
    };
    Ok(head(w_q, w_k, w_v, w_c))
}

/// Heads whose summed output, projected to coordinates `0..s`, approximates an
/// injective target within `γ/4`: one head per relevant position for the
/// positional variants (`χ_i` at coordinate `n(i)`), one head for the bag
/// variant (`(b_i - 1)/(r + 1)` at coordinate `n(i)`).
pub fn build_injective_heads(index_set: &[usize], gamma: f64, mode: &EmbeddingMode) -> Result<HeadConstruction> {
    validate(index_set, gamma, mode)?;
    let (t, s, d, k) = (mode.context_len(), index_set.len(), mode.dim(), index_set.len());
    let r = query_scale(mode.variant, t, s, gamma, mode.delta);
    let k1 = axis(k, 0);
    let cls = mode.cls();
    let w_q = outer(&cls.iter().map(|v| r * v).collect::<Vec<_>>(), &k1);
    let mut embedding = mode.clone();
    let mut heads = Vec::new();
    let mut certificates = Vec::new();
    match mode.variant {
        EmbeddingVariant::BagOfVectors => {
            let h = bag_head(index_set, mode, w_q, HeadTarget::Injective)?;
            let sf = s as f64;
            certificates.extend(head_certificates("", &h, [r, sf + 1.0, 2.0 * sf, sf]));
            heads.push(h);
        }
        _ => {
            let value = numerics::sub(&mode.e0(), &mode.e1());
            for (h, &i) in index_set.iter().enumerate() {
                let key = if mode.variant == EmbeddingVariant::TrainablePos {
                    embedding.positions.row_mut(i).copy_from_slice(&axis(d, h));
                    axis(d, h)
                } else {
                    mode.position(i).to_vec()
                };
                let p = head(w_q.clone(), outer(&key, &k1), outer(&value, &k1), outer(&k1, &axis(d, h)));
                certificates.extend(head_certificates(&format!("head {h} "), &p, [r, 1.0, 2.0, 1.0]));
                heads.push(p);
            }
            if mode.variant == EmbeddingVariant::TrainablePos {
                certificates.push(positional_certificate(&embedding, s));
            }
        }
    }
    Ok(HeadConstruction { target: HeadTarget::Injective, index_set: index_set.to_vec(), embedding, heads, gamma, r, certificates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_system_is_biorthogonal() {
        let a = [1.0, 0.0, 0.0];
        let b = [0.3, 0.9539392014169456, 0.0];
        let duals = dual_system(&[&a, &b]).unwrap();
        for (j, u) in duals.iter().enumerate() {
            for (i, v) in [&a[..], &b[..]].iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((numerics::dot(u, v) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dual_of_orthonormal_set_is_itself() {
        let a = [0.0, 1.0];
        let b = [1.0, 0.0];
        let duals = dual_system(&[&a, &b]).unwrap();
        assert_eq!(duals, vec![a.to_vec(), b.to_vec()]);
    }
}
