use alloc::vec::Vec;
use core::ops::Deref;

use super::Matrix;
use crate::{math, Error, Result};

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    /// Validate and wrap; the sum must be 1 within 1e-12.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("simplex weights must be finite and nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(alloc::format!("simplex weights sum to {s}")));
        }
        Ok(Self(weights))
    }

    /// Uniform weights on `n` entries.
    pub fn uniform(n: usize) -> Self {
        Self(alloc::vec![1.0 / n as f64; n])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SimplexVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Softmax with max subtraction. Entries equal to `-inf` get weight zero.
pub fn softmax(v: &[f64]) -> Result<SimplexVector> {
    let mut out = v.to_vec();
    softmax_in_place(&mut out)?;
    Ok(SimplexVector(out))
}

/// In-place softmax; used by hot loops that own their buffer.
pub(crate) fn softmax_in_place(v: &mut [f64]) -> Result<()> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || v.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = if *x == f64::NEG_INFINITY { 0.0 } else { math::exp(*x - max) };
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
    Ok(())
}

/// Row-wise softmax.
pub fn row_softmax(m: &Matrix) -> Result<Matrix> {
    let mut out = m.clone();
    for i in 0..m.rows() {
        softmax_in_place(out.row_mut(i))?;
    }
    Ok(out)
}

/// Jacobian `diag(p) - p pᵀ` of the softmax at `v`.
pub fn softmax_jacobian(v: &[f64]) -> Result<Matrix> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("softmax_jacobian needs finite input".into()));
    }
    let p = softmax(v)?;
    Ok(Matrix::from_fn(v.len(), v.len(), |i, j| {
        let d = if i == j { p[i] } else { 0.0 };
        d - p[i] * p[j]
    }))
}
