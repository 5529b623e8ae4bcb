//! Dense small-matrix kernels and the norms, softmax machinery, projections,
//! near-orthonormal bases and ε-allocation used throughout the crate.

mod basis;
mod lagrange;
mod matrix;
mod norms;
mod softmax;

pub use basis::{make_basis, NearOrthonormalBasis};
pub use lagrange::{allocate_epsilons, split_objective, Allocation};
pub use matrix::Matrix;
pub use norms::{matrix_norm_pq, project_unit_ball, project_rows, spectral_norm, Lp};
pub use softmax::{row_softmax, softmax, softmax_jacobian, SimplexVector};

use crate::math;

/// Inner product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    math::sqrt(dot(v, v))
}

/// ℓ₁ norm.
pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// ℓ∞ norm.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Elementwise difference `a - b`.
pub fn sub(a: &[f64], b: &[f64]) -> alloc::vec::Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
