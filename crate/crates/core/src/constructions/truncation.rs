use alloc::format;
use alloc::vec::Vec;

use crate::numerics::softmax;
use crate::{math, Error, Result};

/// Effect of dropping the low entries of `z` before the softmax.
///
/// Requires the first `s` entries to be at least `R ≥ 0` and the rest at most 0.
/// Returns `‖softmax(z') - softmax(z)‖₁`, where `z'` sets entries `s..` to `-∞`,
/// together with the bound `2(T - s)/(s e^R)` for `R = min(z[..s])`.
pub fn softmax_truncation_gap(z: &[f64], s: usize) -> Result<(f64, f64)> {
    let t = z.len();
    if s == 0 || s > t {
        return Err(Error::Precondition(format!("need 1 <= s <= T, got s = {s}, T = {t}")));
    }
    let r = z[..s].iter().copied().fold(f64::INFINITY, f64::min);
    if !(r >= 0.0 && r.is_finite() && z[..s].iter().all(|v| v.is_finite())) {
        return Err(Error::Precondition("the first s entries must be finite and nonnegative".into()));
    }
    if z[s..].iter().any(|&v| v > 0.0 || v.is_nan()) {
        return Err(Error::Precondition("entries after the first s must be at most 0".into()));
    }
    let full = softmax(z)?;
    let mut truncated: Vec<f64> = z.to_vec();
    truncated[s..].iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
    let cut = softmax(&truncated)?;
    let gap = full.iter().zip(cut.iter()).map(|(a, b)| (a - b).abs()).sum();
    let bound = 2.0 * (t - s) as f64 / (s as f64 * math::exp(r));
    Ok((gap, bound))
}
