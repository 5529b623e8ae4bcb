use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::Matrix;
use crate::{Error, Result};

/// Three-layer ReLU network `x ↦ wᵀ ReLU([ReLU([x, 1] W_1), 1] W_2)`; the last
/// rows of `w_1` and `w_2` are biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w_1: Matrix,
    pub w_2: Matrix,
    pub w: Vec<f64>,
    /// Half-width of the neighbourhoods on which the output is constant.
    pub delta: f64,
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn affine_relu(x: &[f64], w: &Matrix) -> Vec<f64> {
    let n = x.len();
    (0..w.cols())
        .map(|j| {
            let mut acc = w[(n, j)];
            for (i, &xi) in x.iter().enumerate() {
                acc += xi * w[(i, j)];
            }
            relu(acc)
        })
        .collect()
}

impl MlpParams {
    pub fn input_dim(&self) -> usize {
        self.w_1.rows() - 1
    }

    pub fn hidden_dims(&self) -> (usize, usize) {
        (self.w_1.cols(), self.w_2.cols())
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let h1 = affine_relu(x, &self.w_1);
        let h2 = affine_relu(&h1, &self.w_2);
        h2.iter().zip(&self.w).map(|(a, b)| a * b).sum()
    }
}

/// Network equal to `values[i]` on the `δ`-box (∞-norm) around `points[i]`.
///
/// Each coordinate gets a trapezoid `ψ(a) = (a+2)₊ - (a+1)₊ - (a-1)₊ + (a-2)₊`
/// in `a = (x - x₀)/δ`, which is 1 for `|a| ≤ 1` and 0 for `|a| ≥ 2`. The second
/// layer thresholds the coordinate sum `S` with `(S/δ - d_f/δ + 1)₊ - (S/δ - d_f/δ)₊`.
pub fn build_bump_mlp(points: &[Vec<f64>], values: &[f64], delta: f64) -> Result<MlpParams> {
    let n = points.len();
    if n == 0 || values.len() != n {
        return Err(Error::Shape(format!("{n} points but {} values", values.len())));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1/2], got {delta}")));
    }
    let df = points[0].len();
    if df == 0 || points.iter().any(|p| p.len() != df) {
        return Err(Error::Shape("points must share a positive dimension".into()));
    }
    for i in 0..n {
        for j in i + 1..n {
            let sep = points[i].iter().zip(&points[j]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if sep < 4.0 * delta {
                return Err(Error::Precondition(format!(
                    "points {i} and {j} are {sep} apart in the max norm, below 4*delta = {}",
                    4.0 * delta
                )));
            }
        }
    }
    const OFFSETS: [f64; 4] = [2.0, 1.0, -1.0, -2.0];
    const SIGNS: [f64; 4] = [1.0, -1.0, -1.0, 1.0];
    let d2 = 4 * n * df;
    let col1 = |h: usize, i: usize, j: usize| (h * n + i) * df + j;
    let mut w_1 = Matrix::zeros(df + 1, d2);
    for h in 0..4 {
        for (i, p) in points.iter().enumerate() {
            for (j, &x0) in p.iter().enumerate() {
                let c = col1(h, i, j);
                w_1[(j, c)] = 1.0 / delta;
                w_1[(df, c)] = -x0 / delta + OFFSETS[h];
            }
        }
    }
    let d3 = 2 * n;
    let mut w_2 = Matrix::zeros(d2 + 1, d3);
    let dff = df as f64;
    for i in 0..n {
        for h in 0..4 {
            for j in 0..df {
                w_2[(col1(h, i, j), i)] = SIGNS[h] / delta;
                w_2[(col1(h, i, j), n + i)] = SIGNS[h] / delta;
            }
        }
        w_2[(d2, i)] = 1.0 - dff / delta;
        w_2[(d2, n + i)] = -dff / delta;
    }
    let mut w = vec![0.0; d3];
    for (i, &v) in values.iter().enumerate() {
        w[i] = v;
        w[n + i] = -v;
    }
    Ok(MlpParams { w_1, w_2, w, delta })
}
