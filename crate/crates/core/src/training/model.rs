//! Forward and reverse passes of the 1-layer classifier on the `[CLS]` row.
//!
//! With one layer only the `[CLS]` output reaches the logits, so attention is
//! evaluated for that single query against all `T + 1` keys. This is exact,
//! not an approximation of the full layer.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::params::Params;
use super::{Architecture, Dataset, ModelConfig, CLS_TOKEN};
use crate::math;

const LN_EPS: f64 = 1e-5;

/// Where dropout masks come from. `None` means evaluation mode.
pub type MaskSource<'a, R> = Option<&'a mut R>;

fn dropout_mask<R: Rng>(rng: &mut MaskSource<'_, R>, len: usize, rate: f64) -> Option<Vec<f64>> {
    let rng = rng.as_deref_mut()?;
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    Some((0..len).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect())
}

fn apply_mask(v: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (x, k) in v.iter_mut().zip(m) {
            *x *= k;
        }
    }
}

/// `(x̂, 1/σ)` and the normalized output written to `out`.
fn ln_forward(x: &[f64], gain: &[f64], shift: &[f64], out: &mut [f64], xhat: &mut [f64]) -> f64 {
    let d = x.len() as f64;
    let mean = x.iter().sum::<f64>() / d;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    let inv = 1.0 / math::sqrt(var + LN_EPS);
    for i in 0..x.len() {
        xhat[i] = (x[i] - mean) * inv;
        out[i] = gain[i] * xhat[i] + shift[i];
    }
    inv
}

/// Accumulates gain/shift gradients and adds the input gradient to `dx`.
fn ln_backward(
    dout: &[f64],
    xhat: &[f64],
    inv: f64,
    gain: &[f64],
    dgain: &mut [f64],
    dshift: &mut [f64],
    dx: &mut [f64],
) {
    let d = dout.len() as f64;
    let mut mean_g = 0.0;
    let mut mean_gx = 0.0;
    for i in 0..dout.len() {
        dgain[i] += dout[i] * xhat[i];
        dshift[i] += dout[i];
        let g = dout[i] * gain[i];
        mean_g += g;
        mean_gx += g * xhat[i];
    }
    mean_g /= d;
    mean_gx /= d;
    for i in 0..dout.len() {
        let g = dout[i] * gain[i];
        dx[i] += inv * (g - mean_g - xhat[i] * mean_gx);
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = math::exp(*x - max);
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out[j] = Σ_i v[i] W[i, j]` for a row-major `rows × cols` slice.
fn vecmat(v: &[f64], w: &[f64], cols: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (i, vi) in v.iter().enumerate() {
        if *vi != 0.0 {
            axpy(*vi, &w[i * cols..(i + 1) * cols], out);
        }
    }
}

/// `out[i] = Σ_j W[i, j] u[j]`.
fn matvec(w: &[f64], cols: usize, u: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&w[i * cols..(i + 1) * cols], u);
    }
}

/// `G[i, j] += a[i] b[j]`.
fn outer_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (i, ai) in a.iter().enumerate() {
        if *ai != 0.0 {
            axpy(*ai, b, &mut g[i * cols..(i + 1) * cols]);
        }
    }
}

fn score_scale(cfg: &ModelConfig) -> f64 {
    match cfg.architecture {
        Architecture::PreNorm => 1.0 / math::sqrt(cfg.k as f64),
        Architecture::PaperCore => 1.0,
    }
}

fn token(bits: &[u8], t: usize) -> usize {
    if t == bits.len() {
        CLS_TOKEN
    } else {
        bits[t] as usize
    }
}

/// Intermediate values of one example, kept for the reverse pass.
struct Trace {
    emb_mask: Option<Vec<f64>>,
    /// Attention inputs (layer-normalized `x` or `x` itself), `n × d`.
    z: Vec<f64>,
    ln1_xhat: Vec<f64>,
    ln1_inv: Vec<f64>,
    q: Vec<f64>,
    /// Key directions `W_K^h q_h`, `H × d`.
    r: Vec<f64>,
    /// Softmax weights, `H × n`.
    a: Vec<f64>,
    att_mask: Option<Vec<f64>>,
    /// Dropped weights `ã`, `H × n`.
    at: Vec<f64>,
    pooled: Vec<f64>,
    sum_at: Vec<f64>,
    o: Vec<f64>,
    res_mask: Option<Vec<f64>>,
    block: Option<BlockTrace>,
    /// Input of the readout.
    v: Vec<f64>,
    logits: [f64; 2],
}

struct BlockTrace {
    ln2_xhat: Vec<f64>,
    ln2_inv: f64,
    u: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    mlp_mask: Option<Vec<f64>>,
    lnf_xhat: Vec<f64>,
    lnf_inv: f64,
}

fn forward_trace<R: Rng>(p: &Params, cfg: &ModelConfig, bits: &[u8], mut rng: MaskSource<'_, R>) -> Trace {
    let (d, k, heads) = (cfg.d, cfg.k, cfg.heads);
    let hk = heads * k;
    let n = bits.len() + 1;
    let scale = score_scale(cfg);

    let mut x = vec![0.0; n * d];
    for t in 0..n {
        let row = &mut x[t * d..(t + 1) * d];
        row.copy_from_slice(p.tok.row(token(bits, t)));
        axpy(1.0, p.pos.row(t), row);
    }
    let emb_mask = dropout_mask(&mut rng, n * d, cfg.dropout.embedding);
    apply_mask(&mut x, &emb_mask);

    let (z, ln1_xhat, ln1_inv) = match &p.extras {
        Some(e) => {
            let mut z = vec![0.0; n * d];
            let mut xhat = vec![0.0; n * d];
            let mut inv = vec![0.0; n];
            for t in 0..n {
                let span = t * d..(t + 1) * d;
                inv[t] = ln_forward(&x[span.clone()], &e.ln_1.gain, &e.ln_1.shift, &mut z[span.clone()], &mut xhat[span]);
            }
            (z, xhat, inv)
        }
        None => (x.clone(), Vec::new(), Vec::new()),
    };
    let z_cls = &z[(n - 1) * d..];

    let mut q = vec![0.0; hk];
    vecmat(z_cls, p.w_q.as_slice(), hk, &mut q);
    if let Some(e) = &p.extras {
        axpy(1.0, &e.b_q, &mut q);
    }

    let wk = p.w_k.as_slice();
    let mut r = vec![0.0; heads * d];
    for h in 0..heads {
        let qh = &q[h * k..(h + 1) * k];
        for i in 0..d {
            r[h * d + i] = dot(&wk[i * hk + h * k..i * hk + (h + 1) * k], qh);
        }
    }

    let mut a = vec![0.0; heads * n];
    for h in 0..heads {
        let rh = &r[h * d..(h + 1) * d];
        let ah = &mut a[h * n..(h + 1) * n];
        for t in 0..n {
            ah[t] = scale * dot(&z[t * d..(t + 1) * d], rh);
        }
        softmax_in_place(ah);
    }
    let att_mask = dropout_mask(&mut rng, heads * n, cfg.dropout.attention);
    let mut at = a.clone();
    apply_mask(&mut at, &att_mask);

    let mut pooled = vec![0.0; heads * d];
    let mut sum_at = vec![0.0; heads];
    for h in 0..heads {
        let ph = &mut pooled[h * d..(h + 1) * d];
        for t in 0..n {
            let w = at[h * n + t];
            if w != 0.0 {
                axpy(w, &z[t * d..(t + 1) * d], ph);
            }
            sum_at[h] += w;
        }
    }

    let wv = p.w_v.as_slice();
    let mut o = vec![0.0; hk];
    for h in 0..heads {
        let ph = &pooled[h * d..(h + 1) * d];
        for i in 0..d {
            axpy(ph[i], &wv[i * hk + h * k..i * hk + (h + 1) * k], &mut o[h * k..(h + 1) * k]);
        }
        if let Some(e) = &p.extras {
            axpy(sum_at[h], &e.b_v[h * k..(h + 1) * k], &mut o[h * k..(h + 1) * k]);
        }
    }

    let mut y = vec![0.0; d];
    vecmat(&o, p.w_o.as_slice(), d, &mut y);

    let (res_mask, block, v) = match &p.extras {
        None => (None, None, y),
        Some(e) => {
            axpy(1.0, &e.b_o, &mut y);
            let res_mask = dropout_mask(&mut rng, d, cfg.dropout.output);
            apply_mask(&mut y, &res_mask);
            let mut h1 = x[(n - 1) * d..].to_vec();
            axpy(1.0, &y, &mut h1);

            let mut u = vec![0.0; d];
            let mut ln2_xhat = vec![0.0; d];
            let ln2_inv = ln_forward(&h1, &e.ln_2.gain, &e.ln_2.shift, &mut u, &mut ln2_xhat);
            let mut f = vec![0.0; 4 * d];
            vecmat(&u, e.mlp.w_fc.as_slice(), 4 * d, &mut f);
            axpy(1.0, &e.mlp.b_fc, &mut f);
            let g: Vec<f64> = f.iter().map(|v| cfg.activation.apply(*v)).collect();
            let mut pr = vec![0.0; d];
            vecmat(&g, e.mlp.w_proj.as_slice(), d, &mut pr);
            axpy(1.0, &e.mlp.b_proj, &mut pr);
            let mlp_mask = dropout_mask(&mut rng, d, cfg.dropout.output);
            apply_mask(&mut pr, &mlp_mask);
            let mut h2 = h1;
            axpy(1.0, &pr, &mut h2);

            let mut v = vec![0.0; d];
            let mut lnf_xhat = vec![0.0; d];
            let lnf_inv = ln_forward(&h2, &e.ln_f.gain, &e.ln_f.shift, &mut v, &mut lnf_xhat);
            (res_mask, Some(BlockTrace { ln2_xhat, ln2_inv, u, f, g, mlp_mask, lnf_xhat, lnf_inv }), v)
        }
    };

    let mut logits = [0.0; 2];
    vecmat(&v, p.head.as_slice(), 2, &mut logits);

    Trace { emb_mask, z, ln1_xhat, ln1_inv, q, r, a, att_mask, at, pooled, sum_at, o, res_mask, block, v, logits }
}

/// Mean-reduced cross-entropy of two logits against a 0/1 label, and the
/// derivative with respect to the logits.
fn cross_entropy(logits: [f64; 2], label: u8) -> (f64, [f64; 2]) {
    let m = logits[0].max(logits[1]);
    let lse = m + math::ln(math::exp(logits[0] - m) + math::exp(logits[1] - m));
    let p = [math::exp(logits[0] - lse), math::exp(logits[1] - lse)];
    let y = label as usize;
    let mut d = p;
    d[y] -= 1.0;
    (lse - logits[y], d)
}

fn backward(p: &Params, cfg: &ModelConfig, bits: &[u8], tr: &Trace, dlogits: [f64; 2], grad: &mut Params) {
    let (d, k, heads) = (cfg.d, cfg.k, cfg.heads);
    let hk = heads * k;
    let n = bits.len() + 1;
    let scale = score_scale(cfg);

    outer_acc(grad.head.as_mut_slice(), &tr.v, &dlogits);
    let mut dv = vec![0.0; d];
    matvec(p.head.as_slice(), 2, &dlogits, &mut dv);

    let mut dx = vec![0.0; n * d];
    let dy = match (&p.extras, &tr.block, grad.extras.as_mut()) {
        (Some(e), Some(b), Some(ge)) => {
            let mut dh2 = vec![0.0; d];
            ln_backward(&dv, &b.lnf_xhat, b.lnf_inv, &e.ln_f.gain, &mut ge.ln_f.gain, &mut ge.ln_f.shift, &mut dh2);
            let mut dh1 = dh2.clone();
            let mut dpr = dh2;
            apply_mask(&mut dpr, &b.mlp_mask);
            outer_acc(ge.mlp.w_proj.as_mut_slice(), &b.g, &dpr);
            axpy(1.0, &dpr, &mut ge.mlp.b_proj);
            let mut dg = vec![0.0; 4 * d];
            matvec(e.mlp.w_proj.as_slice(), d, &dpr, &mut dg);
            let df: Vec<f64> = dg.iter().zip(&b.f).map(|(g, f)| g * cfg.activation.derivative(*f)).collect();
            outer_acc(ge.mlp.w_fc.as_mut_slice(), &b.u, &df);
            axpy(1.0, &df, &mut ge.mlp.b_fc);
            let mut du = vec![0.0; d];
            matvec(e.mlp.w_fc.as_slice(), 4 * d, &df, &mut du);
            ln_backward(&du, &b.ln2_xhat, b.ln2_inv, &e.ln_2.gain, &mut ge.ln_2.gain, &mut ge.ln_2.shift, &mut dh1);
            axpy(1.0, &dh1, &mut dx[(n - 1) * d..]);
            let mut dy = dh1;
            apply_mask(&mut dy, &tr.res_mask);
            axpy(1.0, &dy, &mut ge.b_o);
            dy
        }
        _ => dv,
    };

    let o_grad = grad.w_o.as_mut_slice();
    outer_acc(o_grad, &tr.o, &dy);
    let mut d_o = vec![0.0; hk];
    matvec(p.w_o.as_slice(), d, &dy, &mut d_o);

    let wv = p.w_v.as_slice();
    let wk = p.w_k.as_slice();
    let mut dz = vec![0.0; n * d];
    let mut dq = vec![0.0; hk];
    let mut dpooled = vec![0.0; d];
    let mut da = vec![0.0; n];
    let mut dr = vec![0.0; d];
    for h in 0..heads {
        let doh = &d_o[h * k..(h + 1) * k];
        let ph = &tr.pooled[h * d..(h + 1) * d];
        {
            let gwv = grad.w_v.as_mut_slice();
            for i in 0..d {
                axpy(ph[i], doh, &mut gwv[i * hk + h * k..i * hk + (h + 1) * k]);
            }
        }
        let mut dsum = 0.0;
        if let (Some(e), Some(ge)) = (&p.extras, grad.extras.as_mut()) {
            axpy(tr.sum_at[h], doh, &mut ge.b_v[h * k..(h + 1) * k]);
            dsum = dot(&e.b_v[h * k..(h + 1) * k], doh);
        }
        for i in 0..d {
            dpooled[i] = dot(&wv[i * hk + h * k..i * hk + (h + 1) * k], doh);
        }
        let ah = &tr.a[h * n..(h + 1) * n];
        let ath = &tr.at[h * n..(h + 1) * n];
        for t in 0..n {
            let zt = &tr.z[t * d..(t + 1) * d];
            let mut dat = dot(zt, &dpooled) + dsum;
            if ath[t] != 0.0 {
                axpy(ath[t], &dpooled, &mut dz[t * d..(t + 1) * d]);
            }
            if let Some(m) = &tr.att_mask {
                dat *= m[h * n + t];
            }
            da[t] = dat;
        }
        let sda = dot(ah, &da);
        let rh = &tr.r[h * d..(h + 1) * d];
        dr.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..n {
            let ds = scale * ah[t] * (da[t] - sda);
            if ds != 0.0 {
                axpy(ds, rh, &mut dz[t * d..(t + 1) * d]);
                axpy(ds, &tr.z[t * d..(t + 1) * d], &mut dr);
            }
        }
        let qh = &tr.q[h * k..(h + 1) * k];
        let gwk = grad.w_k.as_mut_slice();
        for i in 0..d {
            axpy(dr[i], qh, &mut gwk[i * hk + h * k..i * hk + (h + 1) * k]);
            axpy(dr[i], &wk[i * hk + h * k..i * hk + (h + 1) * k], &mut dq[h * k..(h + 1) * k]);
        }
    }

    let z_cls = &tr.z[(n - 1) * d..];
    outer_acc(grad.w_q.as_mut_slice(), z_cls, &dq);
    if let Some(ge) = grad.extras.as_mut() {
        axpy(1.0, &dq, &mut ge.b_q);
    }
    let mut dzc = vec![0.0; d];
    matvec(p.w_q.as_slice(), hk, &dq, &mut dzc);
    axpy(1.0, &dzc, &mut dz[(n - 1) * d..]);

    match (&p.extras, grad.extras.as_mut()) {
        (Some(e), Some(ge)) => {
            for t in 0..n {
                let span = t * d..(t + 1) * d;
                ln_backward(
                    &dz[span.clone()],
                    &tr.ln1_xhat[span.clone()],
                    tr.ln1_inv[t],
                    &e.ln_1.gain,
                    &mut ge.ln_1.gain,
                    &mut ge.ln_1.shift,
                    &mut dx[span],
                );
            }
        }
        _ => axpy(1.0, &dz, &mut dx),
    }
    apply_mask(&mut dx, &tr.emb_mask);
    for t in 0..n {
        let row = &dx[t * d..(t + 1) * d];
        axpy(1.0, row, grad.tok.row_mut(token(bits, t)));
        axpy(1.0, row, grad.pos.row_mut(t));
    }
}

/// Logits of one example. Dropout is active exactly when `rng` is `Some`.
pub fn example_logits<R: Rng>(p: &Params, cfg: &ModelConfig, bits: &[u8], rng: MaskSource<'_, R>) -> [f64; 2] {
    forward_trace(p, cfg, bits, rng).logits
}

/// Eval-mode `[CLS]` attention weights of one example, one row of `T + 1`
/// weights per head (the last entry is the `[CLS]` position itself).
pub fn cls_attention(p: &Params, cfg: &ModelConfig, bits: &[u8]) -> Vec<Vec<f64>> {
    let n = bits.len() + 1;
    let tr = forward_trace::<rand_chacha::ChaCha8Rng>(p, cfg, bits, None);
    tr.a.chunks(n).map(|c| c.to_vec()).collect()
}

/// Logits for every row of `data`. Dropout is active exactly when `rng` is `Some`.
pub fn model_forward<R: Rng>(p: &Params, cfg: &ModelConfig, data: &Dataset, mut rng: MaskSource<'_, R>) -> Vec<[f64; 2]> {
    (0..data.len()).map(|i| forward_trace(p, cfg, data.row(i), rng.as_deref_mut()).logits).collect()
}

/// Mean cross-entropy over `data` and its gradient.
pub fn loss_and_grad<R: Rng>(p: &Params, cfg: &ModelConfig, data: &Dataset, mut rng: MaskSource<'_, R>) -> (f64, Params) {
    let mut grad = p.zeros_like();
    let mut loss = 0.0;
    let w = 1.0 / data.len() as f64;
    for i in 0..data.len() {
        let bits = data.row(i);
        let tr = forward_trace(p, cfg, bits, rng.as_deref_mut());
        let (l, dl) = cross_entropy(tr.logits, data.labels[i]);
        loss += l;
        backward(p, cfg, bits, &tr, [w * dl[0], w * dl[1]], &mut grad);
    }
    (loss * w, grad)
}

/// Mean cross-entropy without gradients (evaluation mode).
pub fn mean_loss(p: &Params, cfg: &ModelConfig, data: &Dataset) -> f64 {
    let logits = Evaluator::new(p, cfg, data.t).logits_all(data);
    logits.iter().zip(&data.labels).map(|(l, y)| cross_entropy(*l, *y).0).sum::<f64>() / data.len() as f64
}

/// Evaluation-mode forward pass with per-(position, bit) tables.
///
/// Without dropout every token row depends only on its position and bit, and
/// the `[CLS]` query is the same for every input, so scores and value
/// projections can be tabulated once per parameter setting.
pub struct Evaluator<'a> {
    p: &'a Params,
    cfg: &'a ModelConfig,
    t: usize,
    /// Scores, indexed `[(h · n + pos) · 2 + bit]`; the `[CLS]` entry uses bit 0.
    scores: Vec<f64>,
    /// Value projections, indexed `[(pos · 2 + bit) · hk ..]`.
    values: Vec<f64>,
    x_cls: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(p: &'a Params, cfg: &'a ModelConfig, t: usize) -> Self {
        let (d, k, heads) = (cfg.d, cfg.k, cfg.heads);
        let hk = heads * k;
        let n = t + 1;
        let scale = score_scale(cfg);
        let mut zs = vec![0.0; n * 2 * d];
        let mut x_cls = vec![0.0; d];
        for pos in 0..n {
            for bit in 0..2 {
                let tok = if pos == t { CLS_TOKEN } else { bit };
                let mut x = p.tok.row(tok).to_vec();
                axpy(1.0, p.pos.row(pos), &mut x);
                if pos == t {
                    x_cls.copy_from_slice(&x);
                }
                let out = &mut zs[(pos * 2 + bit) * d..(pos * 2 + bit + 1) * d];
                match &p.extras {
                    Some(e) => {
                        let mut xhat = vec![0.0; d];
                        ln_forward(&x, &e.ln_1.gain, &e.ln_1.shift, out, &mut xhat);
                    }
                    None => out.copy_from_slice(&x),
                }
            }
        }
        let z_cls = &zs[(t * 2) * d..(t * 2 + 1) * d];
        let mut q = vec![0.0; hk];
        vecmat(z_cls, p.w_q.as_slice(), hk, &mut q);
        if let Some(e) = &p.extras {
            axpy(1.0, &e.b_q, &mut q);
        }
        let wk = p.w_k.as_slice();
        let mut scores = vec![0.0; heads * n * 2];
        let mut r = vec![0.0; d];
        for h in 0..heads {
            for i in 0..d {
                r[i] = dot(&wk[i * hk + h * k..i * hk + (h + 1) * k], &q[h * k..(h + 1) * k]);
            }
            for pos in 0..n {
                for bit in 0..2 {
                    scores[(h * n + pos) * 2 + bit] = scale * dot(&zs[(pos * 2 + bit) * d..(pos * 2 + bit + 1) * d], &r);
                }
            }
        }
        let mut values = vec![0.0; n * 2 * hk];
        for row in 0..n * 2 {
            let out = &mut values[row * hk..(row + 1) * hk];
            vecmat(&zs[row * d..(row + 1) * d], p.w_v.as_slice(), hk, out);
            if let Some(e) = &p.extras {
                axpy(1.0, &e.b_v, out);
            }
        }
        Self { p, cfg, t, scores, values, x_cls }
    }

    pub fn logits(&self, bits: &[u8]) -> [f64; 2] {
        let (d, k, heads) = (self.cfg.d, self.cfg.k, self.cfg.heads);
        let hk = heads * k;
        let n = self.t + 1;
        let slot = |pos: usize| if pos == self.t { 0 } else { bits[pos] as usize };
        let mut o = vec![0.0; hk];
        let mut a = vec![0.0; n];
        for h in 0..heads {
            for (pos, ap) in a.iter_mut().enumerate() {
                *ap = self.scores[(h * n + pos) * 2 + slot(pos)];
            }
            softmax_in_place(&mut a);
            let oh = &mut o[h * k..(h + 1) * k];
            for (pos, ap) in a.iter().enumerate() {
                let row = pos * 2 + slot(pos);
                axpy(*ap, &self.values[row * hk + h * k..row * hk + (h + 1) * k], oh);
            }
        }
        let p = self.p;
        let mut y = vec![0.0; d];
        vecmat(&o, p.w_o.as_slice(), d, &mut y);
        let v = match &p.extras {
            None => y,
            Some(e) => {
                axpy(1.0, &e.b_o, &mut y);
                let mut h1 = self.x_cls.clone();
                axpy(1.0, &y, &mut h1);
                let mut u = vec![0.0; d];
                let mut scratch = vec![0.0; d];
                ln_forward(&h1, &e.ln_2.gain, &e.ln_2.shift, &mut u, &mut scratch);
                let mut f = vec![0.0; 4 * d];
                vecmat(&u, e.mlp.w_fc.as_slice(), 4 * d, &mut f);
                axpy(1.0, &e.mlp.b_fc, &mut f);
                for x in f.iter_mut() {
                    *x = self.cfg.activation.apply(*x);
                }
                let mut h2 = vec![0.0; d];
                vecmat(&f, e.mlp.w_proj.as_slice(), d, &mut h2);
                axpy(1.0, &e.mlp.b_proj, &mut h2);
                axpy(1.0, &h1, &mut h2);
                let mut v = vec![0.0; d];
                ln_forward(&h2, &e.ln_f.gain, &e.ln_f.shift, &mut v, &mut scratch);
                v
            }
        };
        let mut out = [0.0; 2];
        vecmat(&v, p.head.as_slice(), 2, &mut out);
        out
    }

    pub fn logits_all(&self, data: &Dataset) -> Vec<[f64; 2]> {
        (0..data.len()).map(|i| self.logits(data.row(i))).collect()
    }

    /// Fraction of rows whose argmax logit (ties go to class 0) equals the label.
    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = (0..data.len()).filter(|&i| predict(self.logits(data.row(i))) == data.labels[i]).count();
        hits as f64 / data.len() as f64
    }
}

/// Argmax class; ties go to class 0.
pub fn predict(logits: [f64; 2]) -> u8 {
    u8::from(logits[1] > logits[0])
}

#[cfg(test)]
pub(crate) fn dropout_mask_for_tests<R: Rng>(rng: &mut R, len: usize, rate: f64) -> Vec<f64> {
    dropout_mask(&mut Some(rng), len, rate).unwrap_or_else(|| vec![1.0; len])
}
