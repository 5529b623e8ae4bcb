use alloc::vec;
use alloc::vec::Vec;

use approx::assert_abs_diff_eq;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::audit::{self, AuditOutcome};
use super::*;
use crate::numerics::{project_rows, softmax, SimplexVector};
use crate::rng;

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * r.random_range(-1.0..1.0))
}

fn random_params(r: &mut ChaCha8Rng, d: usize, k: usize, act: Activation) -> AttentionParams {
    AttentionParams::factored(
        random_matrix(r, d, k, 1.0),
        random_matrix(r, d, k, 1.0),
        random_matrix(r, d, k, 1.0),
        random_matrix(r, k, d, 1.0),
        act,
    )
    .unwrap()
}

fn random_layer(r: &mut ChaCha8Rng, d: usize, k: usize, scale: f64) -> LayerWeights {
    LayerWeights {
        w_q: random_matrix(r, d, k, scale),
        w_k: random_matrix(r, d, k, scale),
        w_v: random_matrix(r, d, k, scale),
        w_c: random_matrix(r, k, d, scale),
    }
}

fn perturb_layer(r: &mut ChaCha8Rng, l: &LayerWeights, eps: f64) -> LayerWeights {
    let p = |r: &mut ChaCha8Rng, m: &Matrix| m.add(&random_matrix(r, m.rows(), m.cols(), eps)).unwrap();
    LayerWeights { w_q: p(r, &l.w_q), w_k: p(r, &l.w_k), w_v: p(r, &l.w_v), w_c: p(r, &l.w_c) }
}

#[test]
fn generic_head_with_softmax_matches_transformer_head() {
    let mut r = rng::stream(7, &[1]);
    let (t, d, k) = (5, 4, 3);
    let x = random_matrix(&mut r, t, d, 1.0);
    let z: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
    let params = random_params(&mut r, d, k, Activation::Relu);
    let w_qk = params.w_qk();
    let score = |xr: &[f64], zr: &[f64]| numerics::dot(xr, &w_qk.vecmat(zr));
    let norm = |s: &[f64]| softmax(s).unwrap();
    let phi_in = |xr: &[f64]| params.w_v.vecmat(xr);
    let phi_out = |v: &[f64]| v.iter().map(|&u| Activation::Relu.apply(u)).collect::<Vec<_>>();
    let spec = GenericHeadSpec { score: &score, norm: &norm, phi_in: &phi_in, phi_out: &phi_out };
    let a = generic_head_forward(&x, &z, &spec);
    let b = tf_head_forward(&x, &z, &params);
    for (u, v) in a.iter().zip(&b) {
        assert_abs_diff_eq!(u, v, epsilon = 1e-12);
    }
}

#[test]
fn generic_head_with_uniform_norm_averages() {
    let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.0]]).unwrap();
    let score = |_: &[f64], _: &[f64]| 0.0;
    let norm = |s: &[f64]| SimplexVector::uniform(s.len());
    let id = |v: &[f64]| v.to_vec();
    let spec = GenericHeadSpec { score: &score, norm: &norm, phi_in: &id, phi_out: &id };
    assert_eq!(generic_head_forward(&x, &[0.0, 0.0], &spec), vec![1.0, 0.5]);
}

#[test]
fn layer_rows_equal_head_outputs() {
    let mut r = rng::stream(7, &[2]);
    let x = random_matrix(&mut r, 6, 5, 1.0);
    let params = random_params(&mut r, 5, 2, Activation::Gelu);
    let y = tf_layer_forward(&x, &params);
    for t in 0..x.rows() {
        let row = head_output(&x, x.row(t), &params);
        for (u, v) in y.row(t).iter().zip(&row) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
    }
}

#[test]
fn head_is_permutation_invariant_in_keys() {
    let mut r = rng::stream(7, &[3]);
    let x = random_matrix(&mut r, 5, 4, 1.0);
    let params = random_params(&mut r, 4, 3, Activation::Identity);
    let z = x.row(0).to_vec();
    let y = tf_head_forward(&x, &z, &params);
    let yp = tf_head_forward(&x.permute_rows(&[4, 2, 0, 3, 1]), &z, &params);
    for (u, v) in y.iter().zip(&yp) {
        assert_abs_diff_eq!(u, v, epsilon = 1e-12);
    }
}

#[test]
fn fused_and_factored_scores_agree() {
    let mut r = rng::stream(7, &[4]);
    let p = random_params(&mut r, 4, 2, Activation::Identity);
    let fused = AttentionParams::fused(p.w_qk(), p.w_v.clone(), p.w_c.clone(), p.activation).unwrap();
    let x = random_matrix(&mut r, 3, 4, 1.0);
    let z = [0.3, -0.2, 0.1, 0.9];
    let (a, b) = (p.scores(&x, &z), fused.scores(&x, &z));
    for (u, v) in a.iter().zip(&b) {
        assert_abs_diff_eq!(u, v, epsilon = 1e-12);
    }
    assert!(fused.factors().is_err());
}

#[test]
fn multi_head_is_sum_of_heads() {
    let mut r = rng::stream(7, &[5]);
    let x = random_matrix(&mut r, 4, 3, 1.0);
    let heads: Vec<_> = (0..3).map(|_| random_params(&mut r, 3, 2, Activation::Relu)).collect();
    let z = x.row(3).to_vec();
    let total = multi_head_output(&x, &heads, &z);
    let mut manual = vec![0.0; 3];
    for h in &heads {
        numerics::axpy(1.0, &head_output(&x, &z, h), &mut manual);
    }
    assert_eq!(total, manual);
}

#[test]
fn deep_stack_rows_stay_in_unit_ball() {
    let mut r = rng::stream(7, &[6]);
    let d = 4;
    let layers: Vec<_> = (0..3).map(|_| random_layer(&mut r, d, 3, 3.0)).collect();
    let mut stack = StackParams::new(layers, vec![1.0; d], vec![0.0, 0.0, 0.0, 1.0], Activation::Relu).unwrap();
    for residual in [false, true] {
        stack.residual = residual;
        let x = stack.append_cls(&random_matrix(&mut r, 5, d, 1.0)).unwrap();
        let g = deep_forward(&x, &stack);
        for t in 0..g.rows() {
            assert!(numerics::norm2(g.row(t)) <= 1.0 + 1e-12);
        }
        assert!(scalar_readout(&x, &stack).abs() <= numerics::norm2(&stack.readout) + 1e-12);
    }
}

#[test]
fn stack_rejects_bad_shapes() {
    let layer = LayerWeights::zeros(3, 2);
    assert!(StackParams::new(vec![], vec![0.0; 3], vec![0.0; 3], Activation::Identity).is_err());
    assert!(StackParams::new(vec![layer.clone()], vec![0.0; 3], vec![0.0; 4], Activation::Identity).is_err());
    assert!(StackParams::new(vec![layer], vec![0.0; 4], vec![0.0; 4], Activation::Identity).is_err());
}

fn unit_rows(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    project_rows(&random_matrix(r, rows, cols, 1.0))
}

fn check_all(outcomes: impl Iterator<Item = AuditOutcome>) {
    for o in outcomes {
        assert!(o.holds(), "lhs {} exceeds rhs {}", o.lhs, o.rhs);
    }
}

#[test]
fn head_lipschitz_audit_holds() {
    let mut r = rng::stream(7, &[10]);
    check_all((0..200).map(|i| {
        let act = [Activation::Identity, Activation::Relu, Activation::Gelu][i % 3];
        let (t, d, k) = (2 + i % 6, 2 + i % 4, 1 + i % 3);
        let x = unit_rows(&mut r, t, d);
        let z = x.row(0).to_vec();
        let a = random_params(&mut r, d, k, act);
        let eps = [1e-3, 1e-1, 1.0][i % 3];
        let b = AttentionParams::factored(
            a.factors().unwrap().0.add(&random_matrix(&mut r, d, k, eps)).unwrap(),
            a.factors().unwrap().1.add(&random_matrix(&mut r, d, k, eps)).unwrap(),
            a.w_v.add(&random_matrix(&mut r, d, k, eps)).unwrap(),
            a.w_c.clone(),
            act,
        )
        .unwrap();
        audit::head_lipschitz(&x, &z, &a, &b).unwrap()
    }));
}

#[test]
fn mixing_audits_hold() {
    let mut r = rng::stream(7, &[11]);
    check_all((0..200).flat_map(|i| {
        let (t, d, k) = (2 + i % 5, 2 + i % 3, 1 + i % 3);
        let z = unit_rows(&mut r, t, d);
        let z_hat = project_rows(&z.add(&random_matrix(&mut r, t, d, 0.2)).unwrap());
        let w = random_layer(&mut r, d, k, 1.5);
        let w_hat = perturb_layer(&mut r, &w, 0.3);
        [
            audit::mixing_weight_lipschitz(&z, &w, &w_hat).unwrap(),
            audit::mixing_input_lipschitz(&z, &z_hat, &w).unwrap(),
        ]
    }));
}

#[test]
fn layer_and_readout_audits_hold() {
    let mut r = rng::stream(7, &[12]);
    check_all((0..200).flat_map(|i| {
        let act = [Activation::Identity, Activation::Relu, Activation::Gelu][i % 3];
        let (t, d, k) = (3 + i % 4, 3 + i % 3, 2);
        let g = unit_rows(&mut r, t, d);
        let g_hat = project_rows(&g.add(&random_matrix(&mut r, t, d, 0.1)).unwrap());
        let w = random_layer(&mut r, d, k, 1.0);
        let w_hat = perturb_layer(&mut r, &w, 0.2);
        let readout: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
        let readout_hat: Vec<f64> = readout.iter().map(|v| v + r.random_range(-0.1..0.1)).collect();
        [
            audit::layer_step(&g, &g_hat, &w, &w_hat, act).unwrap(),
            audit::readout_step(g.row(t - 1), g_hat.row(t - 1), &readout, &readout_hat),
        ]
    }));
}
