use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::embedding::{EmbeddingMode, EmbeddingVariant};
use super::function::SparseBooleanFunction;
use super::heads::{build_injective_heads, build_monotone_head, target_separation, HeadConstruction, HeadTarget};
use super::mlp::{build_bump_mlp, MlpParams};
use crate::numerics::{matrix_norm_pq, Lp};
use crate::{Error, Result};

/// Slack allowed when comparing a measured norm with its bound.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

/// One measured norm against the bound it must satisfy.
#[derive(Debug, Clone, PartialEq)]
pub struct NormCertificate {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl NormCertificate {
    pub fn new(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, bound, pass: measured <= bound + CERTIFICATE_SLACK }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineKind {
    /// A single head approximating a monotone symmetric target.
    MonotoneHead,
    /// Heads approximating an injective target.
    InjectiveHeads,
    /// Monotone head followed by the bump MLP; represents a symmetric function exactly.
    Symmetric,
    /// Injective heads followed by the bump MLP; represents any sparse function exactly.
    General,
}

impl PipelineKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::MonotoneHead => "monotone_head",
            Self::InjectiveHeads => "injective_heads",
            Self::Symmetric => "symmetric",
            Self::General => "general",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::MonotoneHead, Self::InjectiveHeads, Self::Symmetric, Self::General].into_iter().find(|k| k.name() == s)
    }
}

/// A compiled construction: embedding, heads and (for exact representation) the MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub kind: PipelineKind,
    pub heads: HeadConstruction,
    pub mlp: Option<MlpParams>,
    /// The represented function; present exactly when `mlp` is.
    pub function: Option<SparseBooleanFunction>,
    pub certificates: Vec<NormCertificate>,
}

impl Pipeline {
    pub fn from_heads(heads: HeadConstruction) -> Self {
        let kind = match heads.target {
            HeadTarget::Monotone => PipelineKind::MonotoneHead,
            HeadTarget::Injective => PipelineKind::InjectiveHeads,
        };
        let certificates = heads.certificates.clone();
        Self { kind, heads, mlp: None, function: None, certificates }
    }

    pub fn context_len(&self) -> usize {
        self.heads.embedding.context_len()
    }

    pub fn index_set(&self) -> &[usize] {
        &self.heads.index_set
    }

    pub fn forward(&self, b: &[bool]) -> Result<Vec<f64>> {
        let y = self.heads.output(b)?;
        Ok(match &self.mlp {
            Some(mlp) => vec![mlp.forward(&y)],
            None => y,
        })
    }

    pub fn target(&self, b: &[bool]) -> Vec<f64> {
        match &self.function {
            Some(f) => vec![f.eval(b)],
            None => self.heads.target_value(b),
        }
    }

    /// Largest admissible `|forward - target|`: `γ/4` for bare heads, round-off for exact pipelines.
    pub fn tolerance(&self) -> f64 {
        match self.mlp {
            Some(_) => 1e-9,
            None => self.heads.gamma / 4.0,
        }
    }

    pub fn certificates_pass(&self) -> bool {
        self.certificates.iter().all(|c| c.pass)
    }

    /// Re-measure every certificate on the current weights, keeping the bounds.
    /// Used after weights are loaded from disk, where they may differ from the
    /// ones the bounds were derived for.
    pub fn recertify(&mut self) {
        let positions_norm = matrix_norm_pq(&self.heads.embedding.positions.transpose(), Lp::Two, Lp::One);
        for c in &mut self.certificates {
            let (head, rest) = match c.name.strip_prefix("head ").and_then(|r| r.split_once(' ')) {
                Some((h, rest)) => (h.parse::<usize>().unwrap_or(0), rest),
                None => (0, c.name.as_str()),
            };
            let params = self.heads.heads.get(head);
            let factors = params.and_then(|p| p.factors().ok());
            let measured = match (rest, &self.mlp) {
                ("W_Q frobenius", _) => factors.map(|f| f.0.frobenius()),
                ("W_K frobenius", _) => factors.map(|f| f.1.frobenius()),
                ("W_V frobenius", _) => params.map(|p| p.w_v.frobenius()),
                ("W_C frobenius", _) => params.map(|p| p.w_c.frobenius()),
                ("P^T (2,1)", _) => Some(positions_norm),
                ("W_1 max entry" | "W_1 max entry (bump width)", Some(m)) => Some(m.w_1.max_abs()),
                ("W_2 max entry" | "W_2 max entry (bump width)", Some(m)) => Some(m.w_2.max_abs()),
                ("w max entry", Some(m)) => Some(m.w.iter().fold(0.0f64, |a, v| a.max(v.abs()))),
                _ => None,
            };
            if let Some(measured) = measured {
                *c = NormCertificate::new(core::mem::take(&mut c.name), measured, c.bound);
            }
        }
    }
}

/// Head margin used under an MLP: the requested `γ` capped by the target's own separation.
pub fn head_gamma(target: HeadTarget, variant: EmbeddingVariant, s: usize, gamma: f64) -> f64 {
    gamma.min(target_separation(target, variant, s))
}

/// Length-`t` input whose relevant bits spell `pattern` (bit `j` at `index_set[j]`), all others off.
fn pattern_input(t: usize, index_set: &[usize], pattern: usize) -> Vec<bool> {
    let mut b = vec![false; t];
    for (j, &i) in index_set.iter().enumerate() {
        b[i] = (pattern >> j) & 1 == 1;
    }
    b
}

fn mlp_certificates(mlp: &MlpParams, points: &[Vec<f64>], g_bound: f64, s: usize, gamma: f64, f_max: f64) -> Vec<NormCertificate> {
    let delta = mlp.delta;
    let b_points = points.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())) + 2.0 * delta;
    let df = mlp.input_dim() as f64;
    let w_max = mlp.w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    vec![
        NormCertificate::new("W_1 max entry", mlp.w_1.max_abs(), 8.0 * g_bound.max(1.0) / gamma),
        NormCertificate::new("W_2 max entry", mlp.w_2.max_abs(), 8.0 * s as f64 / gamma),
        NormCertificate::new("w max entry", w_max, f_max),
        NormCertificate::new("W_1 max entry (bump width)", mlp.w_1.max_abs(), b_points.max(1.0) / delta),
        NormCertificate::new("W_2 max entry (bump width)", mlp.w_2.max_abs(), df / delta),
    ]
}

fn compose(kind: PipelineKind, heads: HeadConstruction, f: &SparseBooleanFunction) -> Result<Pipeline> {
    let s = heads.sparsity();
    let t = heads.embedding.context_len();
    let patterns: Vec<usize> = match kind {
        PipelineKind::Symmetric => (0..=s).map(|r| (1usize << r) - 1).collect(),
        _ => (0..1usize << s).collect(),
    };
    let points: Vec<Vec<f64>> = patterns.iter().map(|&p| heads.target_value(&pattern_input(t, &heads.index_set, p))).collect();
    let values: Vec<f64> = patterns.iter().map(|&p| f.table()[p]).collect();
    let delta = heads.gamma / 4.0;
    let mlp = build_bump_mlp(&points, &values, delta)?;
    let mut certificates = heads.certificates.clone();
    certificates.extend(mlp_certificates(&mlp, &points, heads.target_bound(), s, heads.gamma, f.max_abs()));
    Ok(Pipeline { kind, heads, mlp: Some(mlp), function: Some(f.clone()), certificates })
}

fn check_context(f: &SparseBooleanFunction, mode: &EmbeddingMode) -> Result<()> {
    if f.context_len() != mode.context_len() {
        return Err(Error::Shape(alloc::format!(
            "function has T = {} but the embedding has {} positions",
            f.context_len(),
            mode.context_len()
        )));
    }
    if f.sparsity() == 0 {
        return Err(Error::InvalidArgument("constant functions have no relevant bits to compile".into()));
    }
    Ok(())
}

/// Exact representation of a symmetric function: monotone head, then a 1-D bump MLP over the `s + 1` popcount levels.
pub fn build_symmetric_sparse(f: &SparseBooleanFunction, gamma: f64, mode: &EmbeddingMode) -> Result<Pipeline> {
    check_context(f, mode)?;
    if !f.kind().is_symmetric() {
        return Err(Error::Precondition("symmetric path needs a symmetric function".into()));
    }
    let g = head_gamma(HeadTarget::Monotone, mode.variant, f.sparsity(), gamma);
    let heads = build_monotone_head(f.index_set(), g, mode)?;
    compose(PipelineKind::Symmetric, heads, f)
}

/// Exact representation of any sparse function: injective heads, then an `s`-D bump MLP over the `2^s` patterns.
pub fn build_general_sparse(f: &SparseBooleanFunction, gamma: f64, mode: &EmbeddingMode) -> Result<Pipeline> {
    check_context(f, mode)?;
    let g = head_gamma(HeadTarget::Injective, mode.variant, f.sparsity(), gamma);
    let heads = build_injective_heads(f.index_set(), g, mode)?;
    compose(PipelineKind::General, heads, f)
}

/// Build the embedding and the matching pipeline in one call.
///
/// `kind` picks the path; the exact paths need `f`, the bare-head paths use only its index set.
pub fn compile(
    f: &SparseBooleanFunction,
    kind: PipelineKind,
    variant: EmbeddingVariant,
    gamma: f64,
    delta: Option<f64>,
    seed: u64,
) -> Result<Pipeline> {
    let (t, s) = (f.context_len(), f.sparsity());
    let target = match kind {
        PipelineKind::MonotoneHead | PipelineKind::Symmetric => HeadTarget::Monotone,
        _ => HeadTarget::Injective,
    };
    let g = match kind {
        PipelineKind::Symmetric | PipelineKind::General => head_gamma(target, variant, s, gamma),
        _ => gamma,
    };
    let mode = match variant {
        EmbeddingVariant::DeterministicPos => EmbeddingMode::deterministic(t, s, delta, seed)?,
        EmbeddingVariant::TrainablePos => EmbeddingMode::trainable(t, s),
        EmbeddingVariant::BagOfVectors => EmbeddingMode::bag(t, s, g, delta, seed)?,
    };
    match kind {
        PipelineKind::MonotoneHead => Ok(Pipeline::from_heads(build_monotone_head(f.index_set(), gamma, &mode)?)),
        PipelineKind::InjectiveHeads => Ok(Pipeline::from_heads(build_injective_heads(f.index_set(), gamma, &mode)?)),
        PipelineKind::Symmetric => build_symmetric_sparse(f, gamma, &mode),
        PipelineKind::General => build_general_sparse(f, gamma, &mode),
    }
}
