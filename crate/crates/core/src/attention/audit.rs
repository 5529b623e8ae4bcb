//! Numeric checks of the Lipschitz inequalities behind the covering bounds.
//!
//! Each function evaluates both sides of one inequality on a concrete instance
//! and returns them as an [`AuditOutcome`]; the callers (tests, the acceptance
//! suite) draw the random instances.

use alloc::vec::Vec;

use super::{deep_layer, layer_mixing, tf_head_forward, Activation, AttentionParams, LayerWeights};
use crate::numerics::{self, matrix_norm_pq, project_rows, spectral_norm, Lp, Matrix};
use crate::Result;

/// Softmax Jacobian (1,1)-norm bound.
pub const C_SOFTMAX: f64 = 2.0;

/// Left- and right-hand side of an inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOutcome {
    pub lhs: f64,
    pub rhs: f64,
}

impl AuditOutcome {
    /// True when `lhs ≤ rhs` up to 1e-12 relative/absolute round-off.
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-12 * (1.0 + self.rhs.abs())
    }
}

fn max_row_norm(m: &Matrix) -> f64 {
    matrix_norm_pq(m, Lp::Two, Lp::Inf)
}

/// Largest `‖A z_t‖` over the rows `z_t` of `z`.
fn max_mapped_row_norm(a: &Matrix, z: &Matrix) -> f64 {
    (0..z.rows()).map(|t| numerics::norm2(&a.matvec(z.row(t)))).fold(0.0, f64::max)
}

/// Generic head Lipschitz inequality instantiated for a Transformer head with
/// context `z`: `‖f(θ) − f(θ̂)‖ ≤ C·L_σ·‖W_V‖₂·B_X·‖ΔScore‖∞ + L_σ·max_t ‖(W_V − Ŵ_V)ᵀ x_t‖`.
pub fn head_lipschitz(x: &Matrix, z: &[f64], theta: &AttentionParams, theta_hat: &AttentionParams) -> Result<AuditOutcome> {
    let lhs = numerics::norm2(&numerics::sub(&tf_head_forward(x, z, theta), &tf_head_forward(x, z, theta_hat)));
    let d_score = numerics::norm_inf(&numerics::sub(&theta.scores(x, z), &theta_hat.scores(x, z)));
    let dv = theta.w_v.sub(&theta_hat.w_v)?.transpose();
    let l_out = theta.activation.lipschitz();
    let b_in = spectral_norm(&theta.w_v)?;
    let rhs = C_SOFTMAX * l_out * b_in * max_row_norm(x) * d_score + l_out * max_mapped_row_norm(&dv, x);
    Ok(AuditOutcome { lhs, rhs })
}

fn qk(l: &LayerWeights) -> Matrix {
    l.w_q.matmul(&l.w_k.transpose())
}

/// Weight perturbation of the mixing map `f` for rows of norm at most one.
pub fn mixing_weight_lipschitz(z: &Matrix, w: &LayerWeights, w_hat: &LayerWeights) -> Result<AuditOutcome> {
    let lhs = max_row_norm(&layer_mixing(z, w).sub(&layer_mixing(z, w_hat))?);
    let d_qk = qk(w).sub(&qk(w_hat))?;
    let d_v = w.w_v.sub(&w_hat.w_v)?.transpose();
    let rhs = 2.0 * spectral_norm(&w.w_v)? * max_mapped_row_norm(&d_qk, z) + max_mapped_row_norm(&d_v, z);
    Ok(AuditOutcome { lhs, rhs })
}

/// Input perturbation of the mixing map `f` for rows of norm at most one.
pub fn mixing_input_lipschitz(z: &Matrix, z_hat: &Matrix, w: &LayerWeights) -> Result<AuditOutcome> {
    let lhs = max_row_norm(&layer_mixing(z, w).sub(&layer_mixing(z_hat, w))?);
    let b_v = spectral_norm(&w.w_v)?;
    let b_kq = spectral_norm(&w.w_k.matmul(&w.w_q.transpose()))?;
    let rhs = b_v * (1.0 + 4.0 * b_kq) * max_row_norm(&z.sub(z_hat)?);
    Ok(AuditOutcome { lhs, rhs })
}

/// One projected layer applied to `(g, W)` and `(ĝ, Ŵ)`; the bound combines
/// the output-weight change, the propagated input change and the score and
/// value weight changes.
pub fn layer_step(g: &Matrix, g_hat: &Matrix, w: &LayerWeights, w_hat: &LayerWeights, activation: Activation) -> Result<AuditOutcome> {
    let next = deep_layer(g, w, activation, false);
    let next_hat = deep_layer(g_hat, w_hat, activation, false);
    let lhs = max_row_norm(&next.sub(&next_hat)?);

    let l_sigma = activation.lipschitz();
    let b_c = spectral_norm(&w.w_c)?;
    let b_v = spectral_norm(&w.w_v)?;
    let b_qk = spectral_norm(&w.w_k.matmul(&w.w_q.transpose()))?;
    let inner_hat = project_rows(&layer_mixing(g_hat, w_hat)).map(|v| activation.apply(v));
    let d_c = w.w_c.sub(&w_hat.w_c)?;
    let term_c = max_row_norm(&inner_hat.matmul(&d_c));
    let term_in = l_sigma * b_c * b_v * (1.0 + 4.0 * b_qk) * max_row_norm(&g.sub(g_hat)?);
    let term_qk = 2.0 * l_sigma * b_c * b_v * max_mapped_row_norm(&qk(w).sub(&qk(w_hat))?, g_hat);
    let term_v = l_sigma * b_c * max_mapped_row_norm(&w.w_v.sub(&w_hat.w_v)?.transpose(), g_hat);
    Ok(AuditOutcome { lhs, rhs: term_c + term_in + term_qk + term_v })
}

/// Final linear readout: `|wᵀg − ŵᵀĝ| ≤ ‖w‖‖g − ĝ‖ + |(w − ŵ)ᵀĝ|`.
pub fn readout_step(g_cls: &[f64], g_cls_hat: &[f64], w: &[f64], w_hat: &[f64]) -> AuditOutcome {
    let lhs = (numerics::dot(w, g_cls) - numerics::dot(w_hat, g_cls_hat)).abs();
    let dw: Vec<f64> = numerics::sub(w, w_hat);
    let rhs = numerics::norm2(w) * numerics::norm2(&numerics::sub(g_cls, g_cls_hat)) + numerics::dot(&dw, g_cls_hat).abs();
    AuditOutcome { lhs, rhs }
}
