use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::numerics::{self, softmax, Matrix};
use crate::{math, Error, Result};

/// Inputs and weights witnessing that unbounded-norm heads shatter `log₂ T` points.
#[derive(Debug, Clone, PartialEq)]
pub struct ShatteringInstance {
    pub t: usize,
    /// `log₂ T` inputs; row `t` of input `i` is `(cos 2πt/T, sin 2πt/T, bit i of t)`, bits read most significant first.
    pub inputs: Vec<Matrix>,
    /// For each position `s`: `(w_QK, w_V)` with `w_QK = T²(cos 2πs/T, sin 2πs/T, 0)` and `w_V = (0, 0, 1)`.
    pub weights: Vec<(Vec<f64>, Vec<f64>)>,
}

pub fn build_shattering_instance(t: usize) -> Result<ShatteringInstance> {
    if t < 2 || !t.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("T must be a power of two at least 2, got {t}")));
    }
    let bits = t.trailing_zeros() as usize;
    let angle = |p: usize| 2.0 * core::f64::consts::PI * p as f64 / t as f64;
    let inputs = (0..bits)
        .map(|i| {
            Matrix::from_fn(t, 3, |p, c| match c {
                0 => math::cos(angle(p)),
                1 => math::sin(angle(p)),
                _ => ((p >> (bits - 1 - i)) & 1) as f64,
            })
        })
        .collect();
    let scale = (t * t) as f64;
    let weights = (0..t)
        .map(|p| (alloc::vec![scale * math::cos(angle(p)), scale * math::sin(angle(p)), 0.0], alloc::vec![0.0, 0.0, 1.0]))
        .collect();
    Ok(ShatteringInstance { t, inputs, weights })
}

impl ShatteringInstance {
    /// Attention weights `softmax(X w_QK)` for input `i` under weight setting `p`.
    pub fn attention(&self, i: usize, p: usize) -> Vec<f64> {
        softmax(&self.inputs[i].matvec(&self.weights[p].0)).expect("finite scores").into_vec()
    }

    /// `w_Vᵀ Xᵀ softmax(X w_QK)` with identity activation.
    pub fn output(&self, i: usize, p: usize) -> f64 {
        let a = self.attention(i, p);
        numerics::dot(&self.weights[p].1, &self.inputs[i].vecmat(&a))
    }

    /// Above-threshold pattern over all inputs for weight setting `p`, as a bit mask.
    pub fn pattern(&self, p: usize, threshold: f64) -> u64 {
        (0..self.inputs.len()).fold(0, |m, i| m | ((self.output(i, p) > threshold) as u64) << i)
    }
}

/// Number of distinct above-threshold patterns realized by the weight family.
pub fn count_realized_patterns(inst: &ShatteringInstance, threshold: f64) -> usize {
    (0..inst.weights.len()).map(|p| inst.pattern(p, threshold)).collect::<BTreeSet<_>>().len()
}
