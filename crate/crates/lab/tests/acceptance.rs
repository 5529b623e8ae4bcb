//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion
//! and fails if any criterion fails.
//!
//! Criterion 7 reads the committed desk-grid results from
//! `results/scaling/scaling.csv` (produced by `attncap scaling --out
//! results/scaling`) and re-runs a few of its cells to confirm the file
//! matches this code.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use attncap_core::attention::audit::{self, AuditOutcome};
use attncap_core::attention::{Activation, AttentionParams, LayerWeights};
use attncap_core::capacity::{
    deep_chain, layer_alphas, linear_cover_bound, matrix_cover_bound, rademacher_from_cover, sample_complexity_floor,
    tf_head_cover_bound, tf_head_optimal_split, tf_head_split_value, Convention, NormBudget,
};
use attncap_core::constructions::{
    build_shattering_instance, compile, count_realized_patterns, softmax_truncation_gap, verify_exhaustive, EmbeddingVariant,
    Pipeline, PipelineKind, SamplingPolicy, SparseBooleanFunction,
};
use attncap_core::experiments::{run_parity_seed, summarize, GridSpec, ParitySpec, ScalingRow, TrialJob};
use attncap_core::numerics::{
    allocate_epsilons, matrix_norm_pq, norm1, norm2, norm_inf, project_rows, project_unit_ball, softmax, softmax_jacobian,
    sub, Lp, Matrix,
};
use attncap_core::rng::{self, ChaCha8Rng};
use attncap_core::training::{loss_and_grad, Architecture, Dataset, DropoutRates, ModelConfig, Params};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const VARIANTS: [EmbeddingVariant; 3] =
    [EmbeddingVariant::DeterministicPos, EmbeddingVariant::TrainablePos, EmbeddingVariant::BagOfVectors];

// ---------------------------------------------------------------- 1 and 2

#[derive(Default)]
struct Sweep {
    exact_built: usize,
    exact_failures: Vec<String>,
    head_built: usize,
    head_failures: Vec<String>,
    certified: usize,
    certificate_failures: Vec<String>,
    seconds: f64,
}

fn random_index_set(t: usize, s: usize, seed: u64) -> Vec<usize> {
    SparseBooleanFunction::random(t, s, seed).expect("valid sizes").index_set().to_vec()
}

fn certify(p: &Pipeline, label: &str, sweep: &mut Sweep) {
    let mut again = p.clone();
    again.recertify();
    if !p.certificates.is_empty() && p.certificates_pass() && again.certificates == p.certificates {
        sweep.certified += 1;
    } else {
        let bad: Vec<String> =
            p.certificates.iter().filter(|c| !c.pass).map(|c| format!("{} {:e} > {:e}", c.name, c.measured, c.bound)).collect();
        sweep.certificate_failures.push(format!("{label}: {}", bad.join("; ")));
    }
}

fn construction_sweep() -> Sweep {
    let start = Instant::now();
    let mut sweep = Sweep::default();
    let mut r = rng::stream(2024, &[1]);
    for variant in VARIANTS {
        for s in 1..=3usize {
            for kind in ["and", "parity", "majority", "random"] {
                for i in 0..20u64 {
                    let t = r.random_range(s.max(2)..=10);
                    let seed = r.random::<u32>() as u64;
                    let set = random_index_set(t, s, seed);
                    let f = match kind {
                        "and" => SparseBooleanFunction::and(t, set),
                        "parity" => SparseBooleanFunction::parity(t, set),
                        "majority" => SparseBooleanFunction::majority(t, set),
                        _ => SparseBooleanFunction::random(t, s, seed),
                    }
                    .expect("valid function");
                    let path = if f.kind().is_symmetric() { PipelineKind::Symmetric } else { PipelineKind::General };
                    let label = format!("{} s={s} T={t} {kind} #{i}", variant.name());
                    match compile(&f, path, variant, 0.5, None, seed) {
                        Ok(p) => {
                            sweep.exact_built += 1;
                            let rep = verify_exhaustive(&p, &SamplingPolicy::AllInputs).expect("verification runs");
                            if !(rep.approximation_pass() && rep.max_abs_error <= 1e-9 && rep.inputs_checked == 1u64 << t) {
                                sweep.exact_failures.push(format!("{label}: error {:e}", rep.max_abs_error));
                            }
                            certify(&p, &label, &mut sweep);
                        }
                        Err(e) => sweep.exact_failures.push(format!("{label}: build error {e}")),
                    }
                }
            }
            for i in 0..20u64 {
                let t = r.random_range(s.max(2)..=10);
                let seed = r.random::<u32>() as u64;
                let f = SparseBooleanFunction::and(t, random_index_set(t, s, seed)).expect("valid function");
                for kind in [PipelineKind::MonotoneHead, PipelineKind::InjectiveHeads] {
                    let label = format!("{} s={s} T={t} {} #{i}", variant.name(), kind.name());
                    match compile(&f, kind, variant, 0.5, None, seed) {
                        Ok(p) => {
                            sweep.head_built += 1;
                            let rep = verify_exhaustive(&p, &SamplingPolicy::AllInputs).expect("verification runs");
                            if !(rep.approximation_pass() && rep.max_abs_error <= 0.5 / 4.0) {
                                sweep.head_failures.push(format!("{label}: error {:e}", rep.max_abs_error));
                            }
                            certify(&p, &label, &mut sweep);
                        }
                        Err(e) => sweep.head_failures.push(format!("{label}: build error {e}")),
                    }
                }
            }
        }
    }
    sweep.seconds = start.elapsed().as_secs_f64();
    sweep
}

fn criterion_1(sweep: &Sweep) -> Outcome {
    ensure(sweep.exact_failures.is_empty(), || format!("{} exact failures, first: {}", sweep.exact_failures.len(), sweep.exact_failures[0]))?;
    ensure(sweep.head_failures.is_empty(), || format!("{} head failures, first: {}", sweep.head_failures.len(), sweep.head_failures[0]))?;
    ensure(sweep.exact_built == 3 * 3 * 4 * 20, || format!("only {} exact pipelines built", sweep.exact_built))?;
    ensure(sweep.seconds <= 300.0, || format!("sweep took {:.0} s", sweep.seconds))?;
    Ok(format!(
        "{} Transformer+MLP pipelines exact on all inputs, {} MLP-free heads within gamma/4, {:.1} s",
        sweep.exact_built, sweep.head_built, sweep.seconds
    ))
}

fn criterion_2(sweep: &Sweep) -> Outcome {
    let total = sweep.exact_built + sweep.head_built;
    ensure(sweep.certificate_failures.is_empty(), || {
        format!("{} of {total} fail, first: {}", sweep.certificate_failures.len(), sweep.certificate_failures[0])
    })?;
    ensure(sweep.certified == total && total > 0, || format!("{} of {total} certified", sweep.certified))?;
    Ok(format!("{total} of {total} constructions within their norm bounds, re-measured from the weights"))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mut realized = Vec::new();
    for t in [4usize, 8, 16] {
        let inst = build_shattering_instance(t).map_err(|e| e.to_string())?;
        let points = t.ilog2() as usize;
        ensure(inst.inputs.len() == points, || format!("T={t}: {} points", inst.inputs.len()))?;
        let n = count_realized_patterns(&inst, 0.5);
        ensure(n == 1 << points, || format!("T={t}: {n} of {} patterns", 1 << points))?;
        realized.push(format!("T={t}: {n}/{n}"));
    }
    Ok(realized.join(", "))
}

// ---------------------------------------------------------------- 4

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * r.random_range(-1.0..1.0))
}

fn random_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * r.random_range(-1.0..1.0)).collect()
}

fn random_layer(r: &mut ChaCha8Rng, d: usize, k: usize, scale: f64) -> LayerWeights {
    LayerWeights {
        w_q: random_matrix(r, d, k, scale),
        w_k: random_matrix(r, d, k, scale),
        w_v: random_matrix(r, d, k, scale),
        w_c: random_matrix(r, k, d, scale),
    }
}

fn perturb(r: &mut ChaCha8Rng, l: &LayerWeights, eps: f64) -> LayerWeights {
    let mut p = |m: &Matrix| m.add(&random_matrix(r, m.rows(), m.cols(), eps)).unwrap();
    LayerWeights { w_q: p(&l.w_q), w_k: p(&l.w_k), w_v: p(&l.w_v), w_c: p(&l.w_c) }
}

const ACTIVATIONS: [Activation; 3] = [Activation::Identity, Activation::Relu, Activation::Gelu];
const INSTANCES: usize = 500;

fn audit(name: &str, outcomes: impl Iterator<Item = AuditOutcome>) -> Result<String, String> {
    let mut n = 0;
    for o in outcomes {
        n += 1;
        ensure(o.holds(), || format!("{name}: {} > {}", o.lhs, o.rhs))?;
    }
    ensure(n >= INSTANCES, || format!("{name}: only {n} instances"))?;
    Ok(format!("{name} {n}"))
}

fn criterion_4() -> Outcome {
    let mut r = rng::stream(2024, &[4]);
    let mut done = Vec::new();
    done.push(audit(
        "softmax-l1",
        (0..INSTANCES).map(|i| {
            let n = 2 + i % 19;
            let u = random_vec(&mut r, n, 10.0);
            let v: Vec<f64> = u.iter().map(|x| x + r.random_range(-1.0..1.0) * [1e-3, 0.1, 3.0][i % 3]).collect();
            let lhs = norm1(&sub(&softmax(&u).unwrap().into_vec(), &softmax(&v).unwrap().into_vec()));
            AuditOutcome { lhs, rhs: 2.0 * norm_inf(&sub(&u, &v)) }
        })
        .collect::<Vec<_>>()
        .into_iter(),
    )?);
    done.push(audit(
        "jacobian-(1,1)",
        (0..INSTANCES)
            .map(|i| {
                let u = random_vec(&mut r, 2 + i % 19, 20.0);
                AuditOutcome { lhs: matrix_norm_pq(&softmax_jacobian(&u).unwrap(), Lp::One, Lp::One), rhs: 2.0 }
            })
            .collect::<Vec<_>>()
            .into_iter(),
    )?);
    done.push(audit(
        "projection",
        (0..INSTANCES)
            .map(|i| {
                let (x, y) = (random_vec(&mut r, 1 + i % 8, 3.0), random_vec(&mut r, 1 + i % 8, 3.0));
                AuditOutcome { lhs: norm2(&sub(&project_unit_ball(&x), &project_unit_ball(&y))), rhs: norm2(&sub(&x, &y)) }
            })
            .collect::<Vec<_>>()
            .into_iter(),
    )?);
    done.push(audit(
        "truncation",
        (0..INSTANCES)
            .map(|_| {
                let t = r.random_range(2..40);
                let s = r.random_range(1..=t);
                let big = r.random_range(0.0..8.0);
                let z: Vec<f64> =
                    (0..t).map(|i| if i < s { big + r.random_range(0.0..3.0) } else { -r.random_range(0.0..5.0) }).collect();
                let (gap, bound) = softmax_truncation_gap(&z, s).unwrap();
                AuditOutcome { lhs: gap, rhs: bound }
            })
            .collect::<Vec<_>>()
            .into_iter(),
    )?);
    done.push(audit(
        "f_head-linf",
        (0..INSTANCES)
            .map(|i| {
                let act = ACTIVATIONS[i % 3];
                let (t, d, k) = (2 + i % 6, 2 + i % 4, 1 + i % 3);
                let x = project_rows(&random_matrix(&mut r, t, d, 1.0));
                let z = x.row(0).to_vec();
                let l = random_layer(&mut r, d, k, 1.0);
                let lh = perturb(&mut r, &l, [1e-3, 1e-1, 1.0][i % 3]);
                let a = AttentionParams::factored(l.w_q, l.w_k, l.w_v, l.w_c.clone(), act).unwrap();
                let b = AttentionParams::factored(lh.w_q, lh.w_k, lh.w_v, l.w_c, act).unwrap();
                audit::head_lipschitz(&x, &z, &a, &b).unwrap()
            })
            .collect::<Vec<_>>()
            .into_iter(),
    )?);
    let mut mixing_w = Vec::new();
    let mut mixing_x = Vec::new();
    let mut layer = Vec::new();
    let mut readout = Vec::new();
    for i in 0..INSTANCES {
        let (t, d, k) = (2 + i % 5, 2 + i % 4, 1 + i % 3);
        let z = project_rows(&random_matrix(&mut r, t, d, 1.0));
        let z_hat = project_rows(&z.add(&random_matrix(&mut r, t, d, [0.01, 0.2][i % 2])).unwrap());
        let w = random_layer(&mut r, d, k, 1.5);
        let w_hat = perturb(&mut r, &w, [0.01, 0.3][i % 2]);
        mixing_w.push(audit::mixing_weight_lipschitz(&z, &w, &w_hat).unwrap());
        mixing_x.push(audit::mixing_input_lipschitz(&z, &z_hat, &w).unwrap());
        layer.push(audit::layer_step(&z, &z_hat, &w, &w_hat, ACTIVATIONS[i % 3]).unwrap());
        let v = random_vec(&mut r, d, 2.0);
        let v_hat: Vec<f64> = v.iter().map(|x| x + r.random_range(-0.1..0.1)).collect();
        readout.push(audit::readout_step(z.row(t - 1), z_hat.row(t - 1), &v, &v_hat));
    }
    done.push(audit("mixing-weights", mixing_w.into_iter())?);
    done.push(audit("mixing-inputs", mixing_x.into_iter())?);
    done.push(audit("layer-step", layer.into_iter())?);
    done.push(audit("readout-step", readout.into_iter())?);
    Ok(format!("zero violations ({})", done.join(", ")))
}

// ---------------------------------------------------------------- 5

fn close(name: &str, got: f64, want: f64) -> Result<(), String> {
    ensure((got - want).abs() <= 1e-9 * want.abs().max(1.0), || format!("{name}: {got} != {want}"))
}

fn criterion_5() -> Outcome {
    let e = |r: attncap_core::Result<f64>| r.map_err(|e| e.to_string());
    close("linear cover", e(linear_cover_bound(1.0, 1.0, 1.0, 1).map(|v| v.value))?, 36.0 * 13f64.ln())?;
    close("matrix cover", e(matrix_cover_bound(1.0, 1.0, 1.0, 2, 1.0).map(|v| v.value))?, 2f64.ln())?;
    let n0 = 17.0;
    let ratio = e(matrix_cover_bound(1.0, 1.0, 0.5, 2, std::f64::consts::E * n0).map(|v| v.value))?
        / e(matrix_cover_bound(1.0, 1.0, 0.5, 2, n0).map(|v| v.value))?;
    close("matrix cover N ratio", ratio, ((2.0 * n0).ln() + 1.0) / (2.0 * n0).ln())?;
    let unit = NormBudget { d: 4, k: 4, t: 4, m: 4, eps: 1.0, ..NormBudget::default() };
    close("head cover", e(tf_head_cover_bound(&unit, Convention::Unit).map(|v| v.value))?, 8.0 * 16f64.ln())?;
    let a = allocate_epsilons(&[8.0, 1.0], &[1.0, 1.0], 3.0).map_err(|e| e.to_string())?;
    close("allocation x1", a.x[0], 2.0)?;
    close("allocation x2", a.x[1], 1.0)?;
    close("allocation objective", a.objective, 3.0)?;
    close("rademacher", e(rademacher_from_cover(50.0, std::f64::consts::E, 50, Convention::Unit))?, 2.0)?;
    close("sample floor", e(sample_complexity_floor(3, 300))?, 4_455_100f64.log2())?;
    for (i, alpha) in layer_alphas(&[NormBudget::default().uniform_layer(); 5], 1.0).iter().enumerate() {
        close("layer alpha", *alpha, 5f64.powi(i as i32))?;
    }

    let mut r = rng::stream(2024, &[5]);
    for case in 0..20 {
        let b = NormBudget {
            b_x: r.random_range(0.5..2.0),
            b_v: r.random_range(0.5..2.0),
            b_v21: r.random_range(0.5..3.0),
            b_qk21: r.random_range(0.5..3.0),
            l_sigma: r.random_range(0.5..1.5),
            eps: r.random_range(0.05..1.0),
            ..NormBudget::default()
        };
        let best = tf_head_optimal_split(&b).map_err(|e| e.to_string())?;
        let beta_qk = 2.0 * b.l_sigma * b.b_v * b.b_x;
        for _ in 0..50 {
            let frac: f64 = r.random_range(0.001..0.999);
            let v = tf_head_split_value(&b, frac * b.eps / beta_qk, (1.0 - frac) * b.eps / b.l_sigma).map_err(|e| e.to_string())?;
            ensure(best.value <= v.value * (1.0 + 1e-12), || format!("case {case}: split {frac} beats the optimum"))?;
        }
    }

    for conv in [Convention::Unit, Convention::Explicit] {
        let small = NormBudget { t: 1 << 5, m: 300, ..NormBudget::default() };
        let large = NormBudget { t: 1 << 10, ..small.clone() };
        let got = e(tf_head_cover_bound(&large, conv).map(|v| v.value))? / e(tf_head_cover_bound(&small, conv).map(|v| v.value))?;
        let c = if conv == Convention::Unit { 1.0 } else { 16.0 };
        close("log-in-T ratio", got, (c * 300.0 * 1024.0f64).ln() / (c * 300.0 * 32.0f64).ln())?;

        let mut prev = f64::INFINITY;
        for p in 6..=20 {
            let g = deep_chain(&NormBudget { m: 1 << p, l: 2, ..NormBudget::default() }, conv).map_err(|e| e.to_string())?.generalization;
            ensure(g < prev, || format!("{}: chain not decreasing at m=2^{p}", conv.name()))?;
            prev = g;
        }
    }
    Ok("golden values to 1e-9, optimal split beats 1000 random splits, ratio identity exact, chain decreasing over 15 sizes".into())
}

// ---------------------------------------------------------------- 6

fn tiny(architecture: Architecture) -> ModelConfig {
    ModelConfig { t: 4, d: 8, k: 2, heads: 2, architecture, activation: Activation::Gelu, dropout: DropoutRates::NONE, init_scale: 0.5 }
}

fn loss(p: &Params, cfg: &ModelConfig, data: &Dataset) -> f64 {
    loss_and_grad::<ChaCha8Rng>(p, cfg, data, None).0
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0f64;
    let mut coords = 0;
    for arch in [Architecture::PreNorm, Architecture::PaperCore] {
        let cfg = tiny(arch);
        for draw in 0..3u64 {
            let mut r = rng::stream(2024, &[6, draw]);
            let mut p = Params::init(&cfg, &mut r);
            for t in p.tensors_mut() {
                let base = if t.name.ends_with(".gain") { 1.0 } else { 0.0 };
                t.data.iter_mut().for_each(|x| *x = base + r.random_range(-0.8..0.8));
            }
            let mut data = Dataset::empty(cfg.t);
            for _ in 0..6 {
                let row: Vec<u8> = (0..cfg.t).map(|_| r.random_range(0..2u8)).collect();
                data.push(&row, r.random_range(0..2u8));
            }
            let grad = loss_and_grad::<ChaCha8Rng>(&p, &cfg, &data, None).1;
            let grads: Vec<Vec<f64>> = grad.tensors().iter().map(|t| t.data.to_vec()).collect();
            for (ti, g) in grads.iter().enumerate() {
                for (i, &gi) in g.iter().enumerate() {
                    let orig = p.tensors()[ti].data[i];
                    p.tensors_mut()[ti].data[i] = orig + 1e-5;
                    let up = loss(&p, &cfg, &data);
                    p.tensors_mut()[ti].data[i] = orig - 1e-5;
                    let down = loss(&p, &cfg, &data);
                    p.tensors_mut()[ti].data[i] = orig;
                    let fd = (up - down) / 2e-5;
                    worst = worst.max((gi - fd).abs() / gi.abs().max(fd.abs()).max(1e-6));
                    coords += 1;
                }
            }
        }
    }
    ensure(worst <= 1e-4, || format!("worst relative error {worst:e}"))?;
    Ok(format!("worst relative error {worst:.2e} over {coords} coordinates, 2 architectures x 3 draws"))
}

// ---------------------------------------------------------------- 7

fn results_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../results/scaling")
}

fn parse_row(line: &str) -> Result<ScalingRow, String> {
    let f: Vec<&str> = line.split(',').collect();
    ensure(f.len() == 8, || format!("bad row {line:?}"))?;
    let u = |i: usize| f[i].parse::<usize>().map_err(|e| format!("{line:?}: {e}"));
    Ok(ScalingRow {
        t: u(0)?,
        m: u(1)?,
        trial: u(2)?,
        restart_used: u(3)?,
        iters: u(4)?,
        best_val_acc: f[5].parse().map_err(|e| format!("{line:?}: {e}"))?,
        success: f[6] == "1",
        seed: f[7].parse().map_err(|e| format!("{line:?}: {e}"))?,
    })
}

fn criterion_7() -> Outcome {
    let path = results_dir().join("scaling.csv");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("{}: {e} (run `attncap scaling --out results/scaling`)", path.display()))?;
    let lines: Vec<&str> = text.lines().skip(1).collect();
    let rows = lines.iter().map(|l| parse_row(l)).collect::<Result<Vec<_>, _>>()?;
    let grid = GridSpec::desk();
    let jobs = grid.jobs();
    ensure(rows.len() == jobs.len(), || format!("{} rows, the desk grid has {} cells", rows.len(), jobs.len()))?;
    for (row, job) in rows.iter().zip(&jobs) {
        ensure((row.t, row.m, row.trial, row.seed) == (job.t, job.m, job.trial, job.seed), || format!("row {row:?} out of grid order"))?;
    }

    let start = Instant::now();
    let recheck: Vec<usize> = vec![0, jobs.len() / 2, jobs.len() - 1];
    for &i in &recheck {
        let job: &TrialJob = &jobs[i];
        let fresh = grid.run_job(job).map_err(|e| e.to_string())?;
        ensure(fresh.csv() == lines[i], || format!("recomputed row {} differs from the file: {}", fresh.csv(), lines[i]))?;
    }
    let recheck_s = start.elapsed().as_secs_f64();

    let res = summarize(&grid, &rows);
    let ms: Vec<String> =
        res.thresholds.iter().map(|t| format!("{}:{}", t.t, t.m_star.map_or("-".into(), |m| m.to_string()))).collect();
    ensure(res.thresholds.iter().all(|t| t.m_star.is_some()), || format!("threshold not reached ({})", ms.join(" ")))?;
    ensure(res.inversions <= 1, || format!("{} inversions ({})", res.inversions, ms.join(" ")))?;
    let fits = res.fits.ok_or("no fit")?;
    ensure(fits.log.r_squared >= 0.8, || format!("log fit R^2 {:.3} ({})", fits.log.r_squared, ms.join(" ")))?;
    ensure(fits.linear.rss >= 0.9 * fits.log.rss, || {
        format!("linear rss {:.2} beats log rss {:.2} by more than 10%", fits.linear.rss, fits.log.rss)
    })?;
    Ok(format!(
        "m* = {} ; {} inversions, log R^2 {:.3}, rss log {:.2} vs linear {:.2}; {} rows re-run identically in {:.0} s",
        ms.join(" "),
        res.inversions,
        fits.log.r_squared,
        fits.log.rss,
        fits.linear.rss,
        recheck.len(),
        recheck_s
    ))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let spec = ParitySpec::new(10, 2);
    ensure(spec.batch == 512 && spec.budget == 50_000 && spec.seeds == 10, || "unexpected parity defaults".into())?;
    let mut tried = Vec::new();
    for i in 0..spec.seeds {
        let curve = run_parity_seed(&spec, i).map_err(|e| e.to_string())?;
        if let Some(step) = curve.transition {
            let pre = curve.pre_transition_acc().ok_or("no pre-transition window")?;
            ensure((pre - 0.5).abs() <= 0.05, || format!("seed {i}: pre-transition accuracy {pre:.3}"))?;
            return Ok(format!(
                "seed {i} (index set {:?}) reaches 0.99 windowed accuracy at step {step}, pre-transition accuracy {pre:.3}",
                curve.index_set
            ));
        }
        tried.push(i);
    }
    Err(format!("no transition in seeds {tried:?}"))
}

// ---------------------------------------------------------------- 9

fn attncap(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_attncap")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
                .collect()
        })
        .unwrap_or_default();
    out.sort();
    out
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = |n: &str| dir.path().join(n);
    let construct = d("construct");
    let construct_s = construct.to_str().unwrap();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("construct", vec!["construct", "--t", "10", "--s", "3", "--function", "majority", "--variant", "bag_of_vectors"]),
        ("verify", vec!["verify", "--dir", construct_s, "--set", "samples=16"]),
        ("capacity", vec!["capacity", "--constants", "explicit"]),
        ("shatter", vec!["shatter"]),
        ("dataset", vec!["dataset", "--task", "parity", "--n", "200", "--seed", "3"]),
        ("train", vec!["train", "--t", "12", "--s", "2", "--m", "80", "--max-iters", "40", "--dump-attention", "4"]),
        ("scaling", vec!["scaling", "--t-values", "8,16", "--m-values", "20,60", "--trials", "2", "--set", "max_iters=60", "--set", "holdout=300"]),
        ("parity", vec!["parity", "--t", "8", "--s", "2", "--batch", "128", "--budget", "150", "--seeds", "3"]),
    ];
    let mut checked = Vec::new();
    for (name, args) in &runs {
        let first = d(name);
        let (code, err) = attncap(&[&args[..], &["--workers", "1", "--out", first.to_str().unwrap()]].concat());
        ensure(code == 0, || format!("{name} exited {code}: {err}"))?;
        let original = csv_bytes(&first);
        ensure(!original.is_empty(), || format!("{name} wrote no CSV"))?;
        for workers in ["2", "3"] {
            let again = d(&format!("{name}-{workers}"));
            let (code, err) =
                attncap(&["replay", "--manifest", first.to_str().unwrap(), "--workers", workers, "--out", again.to_str().unwrap()]);
            ensure(code == 0, || format!("{name} replay exited {code}: {err}"))?;
            ensure(csv_bytes(&again) == original, || format!("{name} replay with {workers} workers differs"))?;
        }
        checked.push(format!("{name}({} csv)", original.len()));
    }
    Ok(format!("byte-identical replays at 1, 2 and 3 workers: {}", checked.join(" ")))
}

// ----------------------------------------------------------------

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("criterion {n} ({name}): PASS [{secs:.1} s] {detail}");
            true
        }
        Err(detail) => {
            println!("criterion {n} ({name}): FAIL [{secs:.1} s] {detail}");
            false
        }
    }
}

#[test]
fn acceptance() {
    let sweep = construction_sweep();
    let results = [
        run(1, "construction exactness", || criterion_1(&sweep)),
        run(2, "norm certificates", || criterion_2(&sweep)),
        run(3, "shattering", criterion_3),
        run(4, "inequality audits", criterion_4),
        run(5, "capacity calculators", criterion_5),
        run(6, "gradient correctness", criterion_6),
        run(7, "scaling law", criterion_7),
        run(8, "sparse parity transition", criterion_8),
        run(9, "determinism", criterion_9),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
