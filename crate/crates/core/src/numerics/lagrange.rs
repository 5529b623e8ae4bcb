use alloc::vec::Vec;

use crate::{math, Error, Result};

/// Solution of `min Σ α_i / x_i²` subject to `Σ β_i x_i = C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Closed-form Lagrangian split: `x_i = (C/γ)(α_i/β_i)^{1/3}` with
/// `γ = Σ α_i^{1/3} β_i^{2/3}`, giving objective `γ³/C²`.
pub fn allocate_epsilons(alpha: &[f64], beta: &[f64], c: f64) -> Result<Allocation> {
    if alpha.len() != beta.len() || alpha.is_empty() {
        return Err(Error::InvalidArgument("alpha and beta must be nonempty and equally long".into()));
    }
    if !(c > 0.0) || alpha.iter().chain(beta).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("allocate_epsilons needs positive finite inputs".into()));
    }
    let gamma: f64 = alpha
        .iter()
        .zip(beta)
        .map(|(&a, &b)| math::cbrt(a) * math::cbrt(b * b))
        .sum();
    let x = alpha.iter().zip(beta).map(|(&a, &b)| (c / gamma) * math::cbrt(a / b)).collect();
    Ok(Allocation { x, objective: gamma * gamma * gamma / (c * c) })
}

/// `Σ α_i / x_i²`, the quantity minimized by [`allocate_epsilons`].
pub fn split_objective(alpha: &[f64], x: &[f64]) -> f64 {
    alpha.iter().zip(x).map(|(a, xi)| a / (xi * xi)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn examples() {
        let a = allocate_epsilons(&[1.0, 1.0], &[1.0, 1.0], 2.0).unwrap();
        assert_abs_diff_eq!(a.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.objective, 2.0, epsilon = 1e-12);
        let b = allocate_epsilons(&[8.0, 1.0], &[1.0, 1.0], 3.0).unwrap();
        assert_abs_diff_eq!(b.x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.x[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.objective, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(split_objective(&[8.0, 1.0], &b.x), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(allocate_epsilons(&[0.0], &[1.0], 1.0).is_err());
        assert!(allocate_epsilons(&[1.0], &[1.0], -1.0).is_err());
        assert!(allocate_epsilons(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }
}
