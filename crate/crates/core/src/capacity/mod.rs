//! Covering-number, Rademacher and generalization calculators.
//!
//! Every log-covering bound of the form `C/ε²` is returned as a [`BoundValue`]
//! tagged with the [`Convention`] used for constants hidden under `≲`.
//!
//! - [`Convention::Unit`] sets all hidden constants to 1, uses `ln(mT)` in the
//!   single-layer bounds and `c = 1` in the Dudley step.
//! - [`Convention::Explicit`] evaluates what the ε-split optimization yields:
//!   the factor `2 L_σ B_V B_X` on the QK budget, `ln(dmT)`, and `c = 12`.
//!
//! The linear-class bound and the generalization step have their constants
//! written out, so both conventions share them.

use alloc::vec::Vec;

use crate::math;
use crate::numerics::allocate_epsilons;
use crate::{Error, Result};

/// Dudley entropy-integral constant used by [`Convention::Explicit`].
pub const DUDLEY_CONSTANT: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    Unit,
    Explicit,
}

impl Convention {
    pub fn name(self) -> &'static str {
        match self {
            Convention::Unit => "unit_constants",
            Convention::Explicit => "explicit_constants",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unit" | "unit_constants" => Ok(Convention::Unit),
            "explicit" | "explicit_constants" => Ok(Convention::Explicit),
            other => Err(Error::InvalidArgument(alloc::format!("unknown constant convention '{other}'"))),
        }
    }

    /// Constant in front of the Dudley-derived Rademacher bound.
    pub fn dudley(self) -> f64 {
        match self {
            Convention::Unit => 1.0,
            Convention::Explicit => DUDLEY_CONSTANT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    pub formula_id: &'static str,
    pub constant_convention: Convention,
}

impl BoundValue {
    fn new(value: f64, formula_id: &'static str, constant_convention: Convention) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidArgument(alloc::format!("{formula_id} evaluated to {value}")));
        }
        Ok(Self { value, formula_id, constant_convention })
    }
}

/// Norm bounds, sizes and loss parameters fed to every calculator.
#[derive(Debug, Clone, PartialEq)]
pub struct NormBudget {
    pub b_x: f64,
    pub b_v: f64,
    pub b_v21: f64,
    pub b_qk21: f64,
    pub c_2: f64,
    pub c_21: f64,
    pub l_sigma: f64,
    pub b_w: f64,
    pub b_p: f64,
    pub d: usize,
    pub k: usize,
    pub t: usize,
    pub m: usize,
    pub l: usize,
    pub h: usize,
    pub eps: f64,
    pub delta: f64,
    pub a: f64,
    pub loss_l: f64,
    pub loss_b: f64,
}

impl Default for NormBudget {
    fn default() -> Self {
        Self {
            b_x: 1.0,
            b_v: 1.0,
            b_v21: 1.0,
            b_qk21: 1.0,
            c_2: 1.0,
            c_21: 1.0,
            l_sigma: 1.0,
            b_w: 1.0,
            b_p: 0.0,
            d: 16,
            k: 16,
            t: 16,
            m: 1024,
            l: 1,
            h: 1,
            eps: 0.1,
            delta: 0.05,
            a: 1.0,
            loss_l: 1.0,
            loss_b: 1.0,
        }
    }
}

impl NormBudget {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("B_X", self.b_x),
            ("B_V", self.b_v),
            ("B_V21", self.b_v21),
            ("B_QK21", self.b_qk21),
            ("C_2", self.c_2),
            ("C_21", self.c_21),
            ("L_sigma", self.l_sigma),
            ("B_w", self.b_w),
            ("B_P", self.b_p),
            ("A", self.a),
            ("loss_L", self.loss_l),
            ("loss_b", self.loss_b),
        ];
        for (name, v) in reals {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(alloc::format!("{name} must be a nonnegative finite real, got {v}")));
            }
        }
        let counts = [("d", self.d), ("k", self.k), ("T", self.t), ("m", self.m), ("L", self.l), ("H", self.h)];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(alloc::format!("{name} must be at least 1")));
            }
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(alloc::format!("delta must lie in (0,1), got {}", self.delta)));
        }
        Ok(())
    }

    /// Norms of one head as seen by the multi-head bound.
    pub fn head_norms(&self) -> HeadNorms {
        HeadNorms { b_v21: self.b_v21, b_v: self.b_v, b_qk21: self.b_qk21 }
    }

    /// Per-layer norms implied by the uniform `C_2`, `C_{2,1}` budget.
    pub fn uniform_layer(&self) -> LayerNorms {
        LayerNorms {
            b_qk: self.c_2,
            b_v: self.c_2,
            b_c: self.c_2,
            b_qk21: self.c_21,
            b_v21: self.c_21,
            b_c21: self.c_21,
        }
    }

    fn log_mt(&self) -> f64 {
        math::ln(self.m as f64 * self.t as f64)
    }

    fn log_dmt(&self) -> f64 {
        math::ln(self.d as f64 * self.m as f64 * self.t as f64)
    }

    fn head_log(&self, convention: Convention) -> f64 {
        match convention {
            Convention::Unit => self.log_mt(),
            Convention::Explicit => self.log_dmt(),
        }
    }
}

/// `(B_V^{2,1}, B_V, B_QK^{2,1})` for one head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadNorms {
    pub b_v21: f64,
    pub b_v: f64,
    pub b_qk21: f64,
}

/// Spectral and (2,1) bounds for one layer of the deep stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerNorms {
    pub b_qk: f64,
    pub b_v: f64,
    pub b_c: f64,
    pub b_qk21: f64,
    pub b_v21: f64,
    pub b_c21: f64,
}

fn two_thirds(x: f64) -> f64 {
    let c = math::cbrt(x);
    c * c
}

fn check_positive(pairs: &[(&str, f64)]) -> Result<()> {
    for (name, v) in pairs {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(())
}

/// `36 B₁²B₂²/ε² · ln(2⌈4B₁B₂/ε + 2⌉N + 1)`.
pub fn linear_cover_bound(b_1: f64, b_2: f64, eps: f64, n: usize) -> Result<BoundValue> {
    check_positive(&[("B_1", b_1), ("B_2", b_2), ("eps", eps)])?;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let b = b_1 * b_2;
    let ceil = math::ceil(4.0 * b / eps + 2.0);
    let v = 36.0 * b * b / (eps * eps) * math::ln(2.0 * ceil * n as f64 + 1.0);
    BoundValue::new(v, "linear_cover", Convention::Explicit)
}

/// `(B_X B_W)²/ε² · ln(d₁N)`. `N` is taken as a real so sweeps can vary it
/// continuously.
pub fn matrix_cover_bound(b_x: f64, b_w: f64, eps: f64, d_1: usize, n: f64) -> Result<BoundValue> {
    check_positive(&[("B_X", b_x), ("B_W", b_w), ("eps", eps)])?;
    if d_1 == 0 || !(n >= 1.0) {
        return Err(Error::InvalidArgument("d_1 and N must be at least 1".into()));
    }
    let b = b_x * b_w;
    BoundValue::new(b * b / (eps * eps) * math::ln(d_1 as f64 * n), "matrix_cover", Convention::Unit)
}

fn head_term(h: &HeadNorms, b_x: f64, convention: Convention) -> f64 {
    match convention {
        Convention::Unit => two_thirds(h.b_v21) + two_thirds(h.b_qk21 * h.b_v),
        Convention::Explicit => two_thirds(h.b_v21) + two_thirds(2.0 * h.b_qk21 * h.b_v * b_x),
    }
}

fn heads_bound(budget: &NormBudget, heads: &[HeadNorms], b_x: f64, convention: Convention, id: &'static str) -> Result<BoundValue> {
    budget.validate()?;
    let sum: f64 = heads.iter().map(|h| head_term(h, b_x, convention)).sum();
    let lead = budget.l_sigma * b_x;
    let eps = budget.eps;
    BoundValue::new(lead * lead * sum * sum * sum / (eps * eps) * budget.head_log(convention), id, convention)
}

/// Single-head covering bound `(L_σB_X)²((B_V^{2,1})^{2/3} + (B_QK^{2,1}B_V)^{2/3})³/ε² · ln(mT)`.
pub fn tf_head_cover_bound(budget: &NormBudget, convention: Convention) -> Result<BoundValue> {
    heads_bound(budget, &[budget.head_norms()], budget.b_x, convention, "tf_head_cover")
}

/// Covering bound of `H` summed heads. An empty slice means `H` copies of the
/// budget's own head norms.
pub fn multihead_cover_bound(budget: &NormBudget, heads: &[HeadNorms], convention: Convention) -> Result<BoundValue> {
    if heads.is_empty() {
        let copies: Vec<HeadNorms> = (0..budget.h).map(|_| budget.head_norms()).collect();
        return heads_bound(budget, &copies, budget.b_x, convention, "multihead_cover");
    }
    heads_bound(budget, heads, budget.b_x, convention, "multihead_cover")
}

/// Single-head bound with input radius `B_X + B_P`.
pub fn positional_cover_bound(budget: &NormBudget, convention: Convention) -> Result<BoundValue> {
    heads_bound(budget, &[budget.head_norms()], budget.b_x + budget.b_p, convention, "positional_cover")
}

/// A split `ε_QK`, `ε_V` of the head's error budget and the resulting
/// log-cover size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadSplit {
    pub eps_qk: f64,
    pub eps_v: f64,
    pub value: f64,
}

fn split_problem(budget: &NormBudget) -> Result<([f64; 2], [f64; 2])> {
    budget.validate()?;
    check_positive(&[("B_X", budget.b_x), ("B_V", budget.b_v), ("B_V21", budget.b_v21), ("B_QK21", budget.b_qk21), ("L_sigma", budget.l_sigma)])?;
    let log = budget.log_dmt();
    let alpha = [sq(budget.b_qk21 * budget.b_x) * log, sq(budget.b_v21 * budget.b_x) * log];
    let beta = [2.0 * budget.l_sigma * budget.b_v * budget.b_x, budget.l_sigma];
    Ok((alpha, beta))
}

fn sq(x: f64) -> f64 {
    x * x
}

/// Sum of the two matrix-cover terms at a given split. The split must satisfy
/// `2L_σB_VB_X ε_QK + L_σ ε_V ≤ ε`.
pub fn tf_head_split_value(budget: &NormBudget, eps_qk: f64, eps_v: f64) -> Result<HeadSplit> {
    let (alpha, beta) = split_problem(budget)?;
    check_positive(&[("eps_QK", eps_qk), ("eps_V", eps_v)])?;
    let used = beta[0] * eps_qk + beta[1] * eps_v;
    if used > budget.eps * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(alloc::format!("split spends {used}, budget is {}", budget.eps)));
    }
    let value = alpha[0] / sq(eps_qk) + alpha[1] / sq(eps_v);
    Ok(HeadSplit { eps_qk, eps_v, value })
}

/// The optimal split from the Lagrangian allocation. Its value equals the
/// explicit-convention [`tf_head_cover_bound`].
pub fn tf_head_optimal_split(budget: &NormBudget) -> Result<HeadSplit> {
    let (alpha, beta) = split_problem(budget)?;
    let a = allocate_epsilons(&alpha, &beta, budget.eps)?;
    Ok(HeadSplit { eps_qk: a.x[0], eps_v: a.x[1], value: a.objective })
}

fn alphas(layers: &[LayerNorms], l_sigma: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(layers.len());
    let mut acc = 1.0;
    for l in layers {
        out.push(acc);
        acc *= l_sigma * l.b_c * l.b_v * (1.0 + 4.0 * l.b_qk);
    }
    out
}

/// The products `α_i = Π_{j<i} L_σ B_C^j B_V^j (1 + 4B_QK^j)`.
pub fn layer_alphas(layers: &[LayerNorms], l_sigma: f64) -> Vec<f64> {
    alphas(layers, l_sigma)
}

/// Full deep-stack bound
/// `ln(dmT)/ε² · (B_w^{2/3} + Σ α_i^{2/3}((B_C^{2,1})^{2/3} + d^{2/3}(2L_σB_CB_VB_QK^{2,1})^{2/3} + k^{2/3}(L_σB_CB_V^{2,1})^{2/3}))³`.
///
/// An empty `layers` slice means `L` copies of [`NormBudget::uniform_layer`].
/// The constants are the displayed ones under both conventions.
pub fn deep_cover_bound(budget: &NormBudget, layers: &[LayerNorms], convention: Convention) -> Result<BoundValue> {
    budget.validate()?;
    let uniform: Vec<LayerNorms>;
    let layers = if layers.is_empty() {
        uniform = (0..budget.l).map(|_| budget.uniform_layer()).collect();
        &uniform[..]
    } else {
        layers
    };
    let ls = budget.l_sigma;
    let d23 = two_thirds(budget.d as f64);
    let k23 = two_thirds(budget.k as f64);
    let mut sum = two_thirds(budget.b_w);
    for (l, a) in layers.iter().zip(alphas(layers, ls)) {
        let inner = two_thirds(l.b_c21)
            + d23 * two_thirds(2.0 * ls * l.b_c * l.b_v * l.b_qk21)
            + k23 * two_thirds(ls * l.b_c * l.b_v21);
        sum += two_thirds(a) * inner;
    }
    let eps = budget.eps;
    BoundValue::new(budget.log_dmt() / (eps * eps) * sum * sum * sum, "deep_cover", convention)
}

/// Simplified deep bound `(C_2 L_σ)^{2L} · B_X² B_w² C_{2,1}²/ε² · ln(dmT)`.
pub fn deep_cover_simplified(budget: &NormBudget, convention: Convention) -> Result<BoundValue> {
    budget.validate()?;
    let growth = math::powf(budget.c_2 * budget.l_sigma, 2.0 * budget.l as f64);
    let core = sq(budget.b_x * budget.b_w * budget.c_21) / sq(budget.eps);
    BoundValue::new(growth * core * budget.log_dmt(), "deep_cover_simplified", convention)
}

/// `c√(C_F/m)(1 + ln(A√(m/C_F)))`, with the log term clamped at zero.
pub fn rademacher_from_cover(c_f: f64, a: f64, m: usize, convention: Convention) -> Result<f64> {
    check_positive(&[("C_F", c_f), ("A", a)])?;
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let ratio = math::sqrt(c_f / m as f64);
    let log = math::ln(a / ratio).max(0.0);
    Ok(convention.dudley() * ratio * (1.0 + log))
}

/// `4·L_loss·R + 2b√(ln(1/δ)/(2m))`, where `R` is [`rademacher_from_cover`].
pub fn generalization_bound(
    c_f: f64,
    a: f64,
    m: usize,
    delta: f64,
    loss_l: f64,
    loss_b: f64,
    convention: Convention,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!("delta must lie in (0,1), got {delta}")));
    }
    check_positive(&[("loss_L", loss_l), ("loss_b", loss_b)])?;
    let rad = rademacher_from_cover(c_f, a, m, convention)?;
    let tail = 2.0 * loss_b * math::sqrt(math::ln(1.0 / delta) / (2.0 * m as f64));
    Ok(4.0 * loss_l * rad + tail)
}

/// `log₂ C(T, s)`, the bits needed to name the relevant index set.
pub fn sample_complexity_floor(s: usize, t: usize) -> Result<f64> {
    if s == 0 || s > t {
        return Err(Error::InvalidArgument(alloc::format!("need 1 <= s <= T, got s={s}, T={t}")));
    }
    let k = s.min(t - s);
    let ln: f64 = (0..k).map(|i| math::ln((t - i) as f64) - math::ln((i + 1) as f64)).sum();
    Ok(ln / core::f64::consts::LN_2)
}

/// Cover, Rademacher and generalization values for one budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub cover: BoundValue,
    /// `C_F = ε² · cover`, the coefficient of `1/ε²`.
    pub coefficient: f64,
    pub rademacher: f64,
    pub generalization: f64,
}

/// Deep cover → Rademacher → generalization for the budget's uniform layers.
pub fn deep_chain(budget: &NormBudget, convention: Convention) -> Result<ChainReport> {
    let cover = deep_cover_bound(budget, &[], convention)?;
    let coefficient = cover.value * budget.eps * budget.eps;
    let rademacher = rademacher_from_cover(coefficient, budget.a, budget.m, convention)?;
    let generalization =
        generalization_bound(coefficient, budget.a, budget.m, budget.delta, budget.loss_l, budget.loss_b, convention)?;
    Ok(ChainReport { cover, coefficient, rademacher, generalization })
}

/// Every calculator evaluated on `budget`, in a fixed order.
pub fn all_bounds(budget: &NormBudget, convention: Convention) -> Result<Vec<BoundValue>> {
    let n = budget.m * budget.t;
    Ok(alloc::vec![
        linear_cover_bound(budget.b_w, budget.b_x, budget.eps, n)?,
        matrix_cover_bound(budget.b_x, budget.b_v21, budget.eps, budget.d, n as f64)?,
        tf_head_cover_bound(budget, convention)?,
        multihead_cover_bound(budget, &[], convention)?,
        positional_cover_bound(budget, convention)?,
        deep_cover_bound(budget, &[], convention)?,
        deep_cover_simplified(budget, convention)?,
    ])
}
