use alloc::vec::Vec;

use crate::numerics::{Matrix, SimplexVector};

/// The four maps defining a generic attention head.
pub struct GenericHeadSpec<'a> {
    /// Alignment score of a key row `x` against the context `z`.
    pub score: &'a dyn Fn(&[f64], &[f64]) -> f64,
    /// Normalization of the `T` scores onto the simplex.
    pub norm: &'a dyn Fn(&[f64]) -> SimplexVector,
    /// Per-row input map `ℝ^d → ℝ^k`.
    pub phi_in: &'a dyn Fn(&[f64]) -> Vec<f64>,
    /// Output map `ℝ^k → ℝ^d`.
    pub phi_out: &'a dyn Fn(&[f64]) -> Vec<f64>,
}

/// `φ_out(φ_in(X)ᵀ Norm(Score(x_1, z), …, Score(x_T, z)))`.
pub fn generic_head_forward(x: &Matrix, z: &[f64], spec: &GenericHeadSpec<'_>) -> Vec<f64> {
    let scores: Vec<f64> = (0..x.rows()).map(|t| (spec.score)(x.row(t), z)).collect();
    let weights = (spec.norm)(&scores);
    let mut pooled: Vec<f64> = Vec::new();
    for t in 0..x.rows() {
        let v = (spec.phi_in)(x.row(t));
        if pooled.is_empty() {
            pooled = alloc::vec![0.0; v.len()];
        }
        crate::numerics::axpy(weights[t], &v, &mut pooled);
    }
    (spec.phi_out)(&pooled)
}
