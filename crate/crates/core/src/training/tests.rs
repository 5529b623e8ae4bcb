use super::*;
use alloc::vec;
use crate::numerics::Matrix;
use approx::assert_abs_diff_eq;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn tiny(architecture: Architecture) -> ModelConfig {
    ModelConfig {
        t: 4,
        d: 8,
        k: 2,
        heads: 2,
        architecture,
        activation: Activation::Gelu,
        dropout: DropoutRates::NONE,
        init_scale: 0.5,
    }
}

fn random_dataset(t: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = rng::stream(seed, &[99]);
    let mut data = Dataset::empty(t);
    for _ in 0..n {
        let row: Vec<u8> = (0..t).map(|_| rng.random_range(0..2u8)).collect();
        let y = rng.random_range(0..2u8);
        data.push(&row, y);
    }
    data
}

/// Perturb every tensor (including layer-norm gains and biases) away from its init.
fn scramble(p: &mut Params, seed: u64) {
    let mut rng = rng::stream(seed, &[7]);
    let normal = Normal::new(0.0, 0.5).unwrap();
    for t in p.tensors_mut() {
        let base = if t.name.ends_with(".gain") { 1.0 } else { 0.0 };
        for x in t.data.iter_mut() {
            *x = base + normal.sample(&mut rng);
        }
    }
}

type NoRng = ChaCha8Rng;

fn eval_loss(p: &Params, cfg: &ModelConfig, data: &Dataset) -> f64 {
    loss_and_grad::<NoRng>(p, cfg, data, None).0
}

/// Largest relative error `|g − fd| / max(|g|, |fd|, 1e-6)` over every
/// coordinate of every tensor, and the tensor where it occurs.
fn finite_difference_error(cfg: &ModelConfig, seed: u64) -> (f64, &'static str) {
    let mut p = Params::init(cfg, &mut rng::stream(seed, &[0]));
    scramble(&mut p, seed);
    let data = random_dataset(cfg.t, 6, seed);
    let (_, grad) = loss_and_grad::<NoRng>(&p, cfg, &data, None);
    let h = 1e-5;
    let mut worst = (0.0, "");
    let names: Vec<&'static str> = p.tensors().iter().map(|t| t.name).collect();
    for (ti, name) in names.iter().enumerate() {
        let len = p.tensors()[ti].data.len();
        for i in 0..len {
            let orig = p.tensors()[ti].data[i];
            p.tensors_mut()[ti].data[i] = orig + h;
            let up = eval_loss(&p, cfg, &data);
            p.tensors_mut()[ti].data[i] = orig - h;
            let down = eval_loss(&p, cfg, &data);
            p.tensors_mut()[ti].data[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let g = grad.tensors()[ti].data[i];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, name);
            }
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    for arch in [Architecture::PreNorm, Architecture::PaperCore] {
        for seed in 0..3 {
            let (err, name) = finite_difference_error(&tiny(arch), seed);
            assert!(err <= 1e-4, "{arch:?} seed {seed}: relative error {err:e} in {name}");
        }
    }
}

#[test]
fn readout_gradient_closed_form() {
    let cfg = tiny(Architecture::PreNorm);
    let mut p = Params::init(&cfg, &mut rng::stream(3, &[0]));
    scramble(&mut p, 3);
    let data = random_dataset(cfg.t, 1, 5);
    // Read the readout input v coordinate by coordinate through a unit readout.
    let v: Vec<f64> = (0..cfg.d)
        .map(|i| {
            let mut probe = p.clone();
            probe.head = Matrix::zeros(cfg.d, 2);
            probe.head[(i, 0)] = 1.0;
            model_forward::<NoRng>(&probe, &cfg, &data, None)[0][0]
        })
        .collect();
    let logits = model_forward::<NoRng>(&p, &cfg, &data, None)[0];
    let lse = (logits[0].exp() + logits[1].exp()).ln();
    let y = data.labels[0] as usize;
    let (_, grad) = loss_and_grad::<NoRng>(&p, &cfg, &data, None);
    for c in 0..2 {
        let dl = (logits[c] - lse).exp() - (c == y) as u8 as f64;
        for (i, vi) in v.iter().enumerate() {
            assert_abs_diff_eq!(grad.head[(i, c)], vi * dl, epsilon = 1e-12);
        }
    }
}

#[test]
fn zero_readout_gives_ln2() {
    let cfg = ModelConfig::standard(8);
    let mut state = TrainState::new(cfg, 1).unwrap();
    state.params.head = Matrix::zeros(state.cfg.d, 2);
    let data = random_dataset(8, 20, 2);
    for l in state.forward(&data, true) {
        assert_eq!(l, [0.0, 0.0]);
    }
    let (loss, _) = state.loss_and_grad(&data);
    assert_abs_diff_eq!(loss, core::f64::consts::LN_2, epsilon = 1e-12);
}

#[test]
fn eval_mode_is_deterministic_and_matches_tables() {
    for arch in [Architecture::PreNorm, Architecture::PaperCore] {
        let mut cfg = tiny(arch);
        cfg.dropout = DropoutRates::uniform(0.3);
        let mut state = TrainState::new(cfg, 4).unwrap();
        scramble(&mut state.params, 4);
        let data = random_dataset(4, 30, 8);
        let a = state.forward(&data, false);
        let b = state.forward(&data, false);
        assert_eq!(a, b);
        let fast = state.evaluator().logits_all(&data);
        for (x, y) in a.iter().zip(&fast) {
            assert_abs_diff_eq!(x[0], y[0], epsilon = 1e-12);
            assert_abs_diff_eq!(x[1], y[1], epsilon = 1e-12);
        }
        let c = state.forward(&data, true);
        assert_ne!(a, c);
    }
}

#[test]
fn zero_positions_make_the_model_permutation_invariant() {
    for arch in [Architecture::PreNorm, Architecture::PaperCore] {
        let cfg = tiny(arch);
        let mut p = Params::init(&cfg, &mut rng::stream(5, &[0]));
        scramble(&mut p, 5);
        p.pos = Matrix::zeros(cfg.t + 1, cfg.d);
        let data = random_dataset(4, 10, 9);
        let mut permuted = Dataset::empty(4);
        for i in 0..data.len() {
            let r = data.row(i);
            permuted.push(&[r[2], r[0], r[3], r[1]], data.labels[i]);
        }
        let a = model_forward::<NoRng>(&p, &cfg, &data, None);
        let b = model_forward::<NoRng>(&p, &cfg, &permuted, None);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x[0], y[0], epsilon = 1e-12);
            assert_abs_diff_eq!(x[1], y[1], epsilon = 1e-12);
        }
    }
}

#[test]
fn duplicated_batch_leaves_loss_and_gradient_unchanged() {
    let cfg = tiny(Architecture::PreNorm);
    let mut p = Params::init(&cfg, &mut rng::stream(6, &[0]));
    scramble(&mut p, 6);
    let data = random_dataset(4, 7, 11);
    let mut doubled = data.clone();
    for i in 0..data.len() {
        doubled.push(data.row(i), data.labels[i]);
    }
    let (l1, g1) = loss_and_grad::<NoRng>(&p, &cfg, &data, None);
    let (l2, g2) = loss_and_grad::<NoRng>(&p, &cfg, &doubled, None);
    assert_abs_diff_eq!(l1, l2, epsilon = 1e-12);
    for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
        for (x, y) in a.data.iter().zip(b.data) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
        }
    }
}

fn filled_like(p: &Params, value: f64) -> Params {
    let mut g = p.zeros_like();
    for t in g.tensors_mut() {
        t.data.iter_mut().for_each(|x| *x = value);
    }
    g
}

#[test]
fn adam_first_step_moves_each_coordinate_by_lr() {
    let cfg = tiny(Architecture::PreNorm);
    let mut state = TrainState::new(cfg, 2).unwrap();
    let before = state.params.clone();
    let grads = filled_like(&before, 3.0);
    let opt = AdamConfig { weight_decay: 0.0, ..AdamConfig::default() };
    state.adam_step(&grads, &opt);
    for (a, b) in state.params.tensors().iter().zip(before.tensors()) {
        for (x, y) in a.data.iter().zip(b.data) {
            assert_abs_diff_eq!(y - x, 1e-3 * 3.0 / (3.0 + 1e-8), epsilon = 1e-15);
        }
    }
}

#[test]
fn adam_zero_gradient_without_decay_is_a_no_op() {
    let mut state = TrainState::new(tiny(Architecture::PreNorm), 2).unwrap();
    let before = state.params.clone();
    let grads = before.zeros_like();
    state.adam_step(&grads, &AdamConfig { weight_decay: 0.0, ..AdamConfig::default() });
    assert_eq!(state.params, before);
}

#[test]
fn adam_without_momentum_is_rms_normalized_sgd() {
    let mut state = TrainState::new(tiny(Architecture::PaperCore), 2).unwrap();
    let before = state.params.clone();
    let opt = AdamConfig { lr: 0.01, beta1: 0.0, beta2: 0.0, eps: 1e-8, weight_decay: 0.0 };
    let grads = filled_like(&before, -0.5);
    state.adam_step(&grads, &opt);
    state.adam_step(&grads, &opt);
    let step = 0.01 * 0.5 / (0.5 + 1e-8);
    for (a, b) in state.params.tensors().iter().zip(before.tensors()) {
        for (x, y) in a.data.iter().zip(b.data) {
            assert_abs_diff_eq!(x - y, 2.0 * step, epsilon = 1e-14);
        }
    }
}

#[test]
fn weight_decay_applies_to_linear_weights_only() {
    let mut state = TrainState::new(tiny(Architecture::PreNorm), 2).unwrap();
    let before = state.params.clone();
    let grads = before.zeros_like();
    let opt = AdamConfig { lr: 0.1, weight_decay: 0.5, ..AdamConfig::default() };
    state.adam_step(&grads, &opt);
    assert_eq!(state.params.tok, before.tok);
    for (a, b) in state.params.w_q.as_slice().iter().zip(before.w_q.as_slice()) {
        assert_abs_diff_eq!(*a, b * 0.95, epsilon = 1e-15);
    }
}

#[test]
fn dropout_is_unbiased() {
    let mut rng = rng::stream(12, &[0]);
    let v = [0.7, -1.3, 2.0];
    let n = 10_000;
    let mut sums = [0.0; 3];
    let mut sq = [0.0; 3];
    for _ in 0..n {
        let mask = model::dropout_mask_for_tests(&mut rng, 3, 0.1);
        for i in 0..3 {
            let x = v[i] * mask[i];
            sums[i] += x;
            sq[i] += x * x;
        }
    }
    for i in 0..3 {
        let mean = sums[i] / n as f64;
        let var = sq[i] / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!((mean - v[i]).abs() <= 3.0 * se, "coordinate {i}: mean {mean} vs {}", v[i]);
    }
}

fn copy_task(t: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = rng::stream(seed, &[3]);
    let mut data = Dataset::empty(t);
    for _ in 0..n {
        let row: Vec<u8> = (0..t).map(|_| rng.random_range(0..2u8)).collect();
        let y = row[0];
        data.push(&row, y);
    }
    data
}

fn small_cfg(t: usize) -> ModelConfig {
    ModelConfig { d: 16, k: 4, heads: 4, ..ModelConfig::standard(t) }
}

#[test]
fn separable_toy_task_is_learned() {
    let train = copy_task(2, 64, 1);
    let holdout = copy_task(2, 200, 2);
    let mut state = TrainState::new(small_cfg(2), 17).unwrap();
    let opts = TrainOptions { max_iters: 1000, ..TrainOptions::default() };
    let rec = train_until(&mut state, &train, &holdout, &opts);
    assert!(rec.success, "{rec:?}");
    assert!(rec.iters <= 1000);
}

#[test]
fn loss_mostly_decreases_early() {
    let train = copy_task(2, 64, 1);
    let opt = AdamConfig::default();
    let mut good = 0;
    for seed in 0..10 {
        let mut state = TrainState::new(small_cfg(2), seed).unwrap();
        let mut prev = mean_loss(&state.params, &state.cfg, &train);
        let mut monotone = true;
        for _ in 0..50 {
            state.train_step(&train, &opt);
            let cur = mean_loss(&state.params, &state.cfg, &train);
            if cur > prev {
                monotone = false;
            }
            prev = cur;
        }
        good += monotone as usize;
    }
    assert!(good >= 9, "only {good} of 10 seeds had non-increasing loss");
}

#[test]
fn zero_budget_only_evaluates() {
    let train = copy_task(4, 32, 1);
    let holdout = copy_task(4, 100, 2);
    let mut state = TrainState::new(small_cfg(4), 3).unwrap();
    let before = state.params.clone();
    let rec = train_until(&mut state, &train, &holdout, &TrainOptions { max_iters: 0, ..TrainOptions::default() });
    assert_eq!(rec.iters, 0);
    assert_eq!(state.params, before);
    assert_eq!(rec.success, rec.best_val_acc > 0.99);
    assert_eq!(rec.best_val_acc, state.accuracy(&holdout));
}

#[test]
fn fixed_seeds_reproduce_the_record() {
    let train = copy_task(6, 40, 1);
    let holdout = copy_task(6, 100, 2);
    let opts = TrainOptions { max_iters: 30, ..TrainOptions::default() };
    let run = || {
        let mut s = TrainState::new(small_cfg(6), 21).unwrap();
        let r = train_until(&mut s, &train, &holdout, &opts);
        (r, s.params)
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a, b);
    assert_eq!(pa, pb);
    assert_eq!(a.best_val_acc.to_bits(), b.best_val_acc.to_bits());
}

#[test]
fn config_validation() {
    assert!(ModelConfig::standard(10).validate().is_ok());
    assert!(ModelConfig { heads: 3, k: 4, d: 8, ..ModelConfig::standard(4) }.validate().is_err());
    assert!(ModelConfig { dropout: DropoutRates::uniform(1.0), ..ModelConfig::standard(4) }.validate().is_err());
    assert!(Dataset::new(3, vec![0, 1, 0, 1], vec![1]).is_err());
    assert!(Dataset::new(2, vec![0, 2], vec![1]).is_err());
    assert_eq!(Architecture::parse("paper-core").unwrap(), Architecture::PaperCore);
}

#[test]
fn cls_attention_rows_are_distributions() {
    let cfg = ModelConfig { heads: 3, ..ModelConfig::standard(5) };
    let state = TrainState::new(cfg.clone(), 4).unwrap();
    let a = model::cls_attention(&state.params, &cfg, &[1, 0, 1, 1, 0]);
    assert_eq!(a.len(), 3);
    for row in &a {
        assert_eq!(row.len(), 6);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&w| w > 0.0));
    }
}
