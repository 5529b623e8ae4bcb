//! Subcommand bodies. Each takes a resolved configuration, an output
//! directory and a worker count, writes its files and returns an exit code.
//! Results never depend on the worker count: parallel work is keyed by
//! index and merged in index order.

use anyhow::{bail, Context, Result};
use attncap_core::capacity::{all_bounds, deep_chain, tf_head_optimal_split};
use attncap_core::constructions::{
    blocks, build_shattering_instance, compile, count_realized_patterns, verify_range, ConstructionReport, PartialReport,
    Pipeline, SamplingPolicy, SparseBooleanFunction, MAX_EXHAUSTIVE_T,
};
use attncap_core::experiments::{
    gen_dataset_lenient, run_parity_seed, run_trial, summarize, GridSpec, ParityCurve, ScalingResult, ScalingRow,
    TaskKind, TaskSpec, PARITY_HEADER, SCALING_HEADER,
};
use attncap_core::rng::child_seed;
use attncap_core::training::cls_attention;
use rayon::prelude::*;
use std::path::Path;
use toml::{Table, Value};

use crate::config::{
    from_table, to_table, CapacityConfig, ConstructConfig, DatasetConfig, ParityConfig, ScalingConfig, ShatterConfig,
    TrainConfig, VerifyConfig,
};
use crate::io::{
    load_pipeline_weights, read_toml, report_table, save_checkpoint, save_pipeline_weights, write_atomic,
    write_certificates, write_csv, write_toml,
};
use crate::plot::threshold_svg;

pub fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?)
}

fn log(msg: impl AsRef<str>) {
    eprintln!("{}", msg.as_ref());
}

fn make_function(cfg: &ConstructConfig) -> Result<SparseBooleanFunction> {
    let index_set = if cfg.index_set.is_empty() {
        TaskSpec::random(TaskKind::Conjunction, cfg.t, cfg.s, cfg.seed)?.index_set
    } else {
        cfg.index_set.clone()
    };
    Ok(match cfg.function.as_str() {
        "and" => SparseBooleanFunction::and(cfg.t, index_set)?,
        "parity" => SparseBooleanFunction::parity(cfg.t, index_set)?,
        "majority" => SparseBooleanFunction::majority(cfg.t, index_set)?,
        "random" => {
            let f = SparseBooleanFunction::random(cfg.t, index_set.len(), cfg.seed)?;
            SparseBooleanFunction::new(cfg.t, index_set, f.table().to_vec(), f.kind())?
        }
        other => bail!("unknown function {other:?}; expected and, parity, majority or random"),
    })
}

fn policy_for(t: usize, samples: usize, seed: u64) -> SamplingPolicy {
    if t <= MAX_EXHAUSTIVE_T {
        SamplingPolicy::AllInputs
    } else {
        SamplingPolicy::RelevantExhaustive { samples, seed }
    }
}

/// Verification split into blocks over the worker pool and merged in block order.
pub fn verify_parallel(p: &Pipeline, policy: &SamplingPolicy, workers: usize) -> Result<ConstructionReport> {
    let total = policy.input_count(p.context_len(), p.index_set().len());
    let parts = blocks(total, workers.max(1) * 8);
    let partials: Vec<PartialReport> = pool(workers)?.install(|| {
        parts.par_iter().map(|r| verify_range(p, policy, r.clone())).collect::<attncap_core::Result<Vec<_>>>()
    })?;
    let merged = partials.into_iter().fold(PartialReport::empty(), PartialReport::merge);
    Ok(ConstructionReport::from_partial(merged, p))
}

fn write_report(out: &Path, name: &str, p: &Pipeline, report: &ConstructionReport) -> Result<()> {
    let mut t = report_table(report);
    t.insert("pipeline".into(), p.kind.name().into());
    t.insert("variant".into(), p.heads.variant().name().into());
    t.insert("gamma".into(), p.heads.gamma.into());
    t.insert("query_scale".into(), p.heads.r.into());
    t.insert("heads".into(), (p.heads.heads.len() as i64).into());
    t.insert("d".into(), (p.heads.embedding.dim() as i64).into());
    write_toml(&out.join(name), &t)?;
    write_certificates(&out.join("certificates.csv"), &report.certificates)
}

pub fn construct(cfg: &ConstructConfig, out: &Path, workers: usize) -> Result<i32> {
    let f = make_function(cfg)?;
    let p = compile(&f, cfg.pipeline_kind()?, cfg.embedding_variant()?, cfg.gamma, cfg.delta(), cfg.seed)?;
    save_pipeline_weights(out, &p)?;
    let mut recipe = Table::new();
    recipe.insert("recipe".into(), Value::Table(to_table(cfg)?));
    recipe.insert("index_set".into(), Value::Array(f.index_set().iter().map(|&i| Value::Integer(i as i64)).collect()));
    recipe.insert("table".into(), Value::Array(f.table().iter().map(|&v| Value::Float(v)).collect()));
    write_toml(&out.join("construction.toml"), &recipe)?;
    let report = verify_parallel(&p, &policy_for(cfg.t, cfg.samples, cfg.seed), workers)?;
    write_report(out, "report.toml", &p, &report)?;
    println!(
        "{} / {}: max error {:.3e} (tolerance {:.3e}), certificates {}",
        p.kind.name(),
        p.heads.variant().name(),
        report.max_abs_error,
        report.tolerance,
        if report.certificates.iter().all(|c| c.pass) { "pass" } else { "FAIL" }
    );
    Ok(if report.passed() { 0 } else { 1 })
}

/// Rebuilds the pipeline recorded in `dir` and loads its weights from disk.
pub fn load_construction(dir: &Path) -> Result<Pipeline> {
    let t = read_toml(&dir.join("construction.toml"))?;
    let recipe: ConstructConfig =
        from_table(t.get("recipe").and_then(Value::as_table).context("construction.toml has no [recipe]")?.clone())?;
    let f = make_function(&recipe)?;
    let mut p = compile(&f, recipe.pipeline_kind()?, recipe.embedding_variant()?, recipe.gamma, recipe.delta(), recipe.seed)?;
    load_pipeline_weights(dir, &mut p)?;
    Ok(p)
}

pub fn verify(cfg: &VerifyConfig, out: &Path, workers: usize) -> Result<i32> {
    if cfg.dir.is_empty() {
        bail!("verify needs the construction directory (--dir)");
    }
    let p = load_construction(Path::new(&cfg.dir))?;
    let report = verify_parallel(&p, &policy_for(p.context_len(), cfg.samples, cfg.seed), workers)?;
    write_report(out, "verify_report.toml", &p, &report)?;
    for c in report.certificates.iter().filter(|c| !c.pass) {
        println!("certificate failed: {} measured {:.6e} > bound {:.6e}", c.name, c.measured, c.bound);
    }
    println!(
        "max error {:.3e} over {} inputs (tolerance {:.3e}): {}",
        report.max_abs_error,
        report.inputs_checked,
        report.tolerance,
        if report.passed() { "PASS" } else { "FAIL" }
    );
    Ok(if report.passed() { 0 } else { 1 })
}

pub fn capacity(cfg: &CapacityConfig, out: &Path) -> Result<i32> {
    let conv = cfg.convention()?;
    let budget = cfg.budget()?;
    let bounds = all_bounds(&budget, conv)?;
    println!("{:<28} {:>24}  convention", "formula", "value");
    for b in &bounds {
        println!("{:<28} {:>24.10e}  {}", b.formula_id, b.value, b.constant_convention.name());
    }
    let split = tf_head_optimal_split(&budget)?;
    println!("optimal head split: eps_qk = {:.6e}, eps_v = {:.6e}", split.eps_qk, split.eps_v);
    write_csv(
        &out.join("capacity.csv"),
        "formula_id,value,convention",
        bounds.iter().map(|b| format!("{},{:.17e},{}", b.formula_id, b.value, b.constant_convention.name())),
    )?;
    let mut rows = Vec::new();
    for k in cfg.sweep_from..=cfg.sweep_to {
        let mut b = budget.clone();
        b.m = 1usize << k;
        let c = deep_chain(&b, conv)?;
        rows.push(format!("{},{:.17e},{:.17e},{:.17e},{:.17e}", b.m, c.cover.value, c.coefficient, c.rademacher, c.generalization));
    }
    write_csv(&out.join("chain.csv"), "m,cover,coefficient,rademacher,generalization", rows)?;
    Ok(0)
}

pub fn shatter(cfg: &ShatterConfig, out: &Path) -> Result<i32> {
    let mut patterns = Vec::new();
    let mut summary = Vec::new();
    let mut ok = true;
    for &t in &cfg.t_values {
        let inst = build_shattering_instance(t)?;
        for p in 0..inst.weights.len() {
            patterns.push(format!("{t},{p},{}", inst.pattern(p, cfg.threshold)));
        }
        let count = count_realized_patterns(&inst, cfg.threshold);
        let needed = 1usize << inst.inputs.len();
        ok &= count == needed;
        println!("T = {t}: {count} of {needed} sign patterns on {} points", inst.inputs.len());
        summary.push(format!("{t},{},{count},{needed},{}", inst.inputs.len(), u8::from(count == needed)));
    }
    write_csv(&out.join("patterns.csv"), "T,weight_index,pattern", patterns)?;
    write_csv(&out.join("shatter.csv"), "T,points,realized,required,pass", summary)?;
    Ok(if ok { 0 } else { 1 })
}

pub fn dataset(cfg: &DatasetConfig, out: &Path) -> Result<i32> {
    let kind = TaskKind::parse(&cfg.task)?;
    let task = if cfg.index_set.is_empty() {
        TaskSpec::random(kind, cfg.t, cfg.s, cfg.seed)?
    } else {
        TaskSpec::new(kind, cfg.t, cfg.index_set.clone())?
    };
    let (g, exhausted) = gen_dataset_lenient(&task, cfg.n, child_seed(cfg.seed, &[0]), cfg.reject_ambiguous)?;
    if exhausted {
        log("warning: rejection budget exhausted; the dataset is still ambiguous");
    }
    let rows = (0..g.data.len()).map(|i| {
        let bits: String = g.data.row(i).iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
        format!("{bits},{}", g.data.labels[i])
    });
    write_csv(&out.join("dataset.csv"), "bits,label", rows)?;
    let mut t = Table::new();
    t.insert("kind".into(), task.kind.name().into());
    t.insert("index_set".into(), Value::Array(task.index_set.iter().map(|&i| Value::Integer(i as i64)).collect()));
    t.insert("bias".into(), task.p.into());
    t.insert("draws".into(), (g.draws as i64).into());
    t.insert("ambiguity".into(), format!("{:?}", g.ambiguity).into());
    t.insert("positive_rate".into(), g.data.positive_rate().into());
    write_toml(&out.join("task.toml"), &t)?;
    println!("{} rows, index set {:?}, positive rate {:.4}", g.data.len(), task.index_set, g.data.positive_rate());
    Ok(0)
}

pub fn train(cfg: &TrainConfig, out: &Path) -> Result<i32> {
    let task = TaskSpec::random(cfg.kind()?, cfg.t, cfg.s, cfg.seed)?;
    let knobs = cfg.knobs()?;
    let outcome = run_trial(&task, cfg.m, &knobs, cfg.seed)?;
    let row = ScalingRow {
        t: cfg.t,
        m: cfg.m,
        trial: 0,
        restart_used: outcome.restart_used,
        iters: outcome.record.iters,
        best_val_acc: outcome.record.best_val_acc,
        success: outcome.record.success,
        seed: cfg.seed,
    };
    write_csv(&out.join("trial.csv"), SCALING_HEADER, [row.csv()])?;
    let mut model = knobs.model.clone();
    model.t = cfg.t;
    save_checkpoint(&out.join("checkpoint"), &model, &outcome.params)?;
    if cfg.dump_attention > 0 {
        let (holdout, _) = gen_dataset_lenient(&task, cfg.dump_attention, child_seed(cfg.seed, &[1]), false)?;
        let mut rows = Vec::new();
        for i in 0..holdout.data.len() {
            let a = cls_attention(&outcome.params, &model, holdout.data.row(i));
            for (h, w) in a.iter().enumerate() {
                for (pos, v) in w.iter().enumerate() {
                    rows.push(format!("{i},{h},{pos},{v:.8}"));
                }
            }
        }
        write_csv(&out.join("attention.csv"), "example,head,position,weight", rows)?;
    }
    println!(
        "index set {:?}: best holdout accuracy {:.4} after {} iterations ({} restarts), success = {}",
        task.index_set, row.best_val_acc, row.iters, row.restart_used, row.success
    );
    Ok(0)
}

/// Runs every cell of `grid` on `workers` threads; rows come back in job order.
pub fn scaling_rows(grid: &GridSpec, workers: usize) -> Result<Vec<ScalingRow>> {
    let jobs = grid.jobs();
    let total = jobs.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|j| {
                let r = grid.run_job(j);
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                if let Ok(row) = &r {
                    log(format!("[{n}/{total}] T={} m={} trial={} success={}", row.t, row.m, row.trial, row.success));
                }
                r
            })
            .collect::<attncap_core::Result<Vec<_>>>()
    })
    .map_err(Into::into)
}

/// Writes the scaling CSV, the derived tables, the fit summary and the plot.
pub fn write_scaling_outputs(out: &Path, grid: &GridSpec, rows: &[ScalingRow]) -> Result<ScalingResult> {
    write_csv(&out.join("scaling.csv"), SCALING_HEADER, rows.iter().map(ScalingRow::csv))?;
    let res = summarize(grid, rows);
    write_csv(
        &out.join("cells.csv"),
        "T,m,successes,trials,rate",
        res.cells.iter().map(|c| format!("{},{},{},{},{:.6}", c.t, c.m, c.successes, c.trials, c.rate())),
    )?;
    write_csv(
        &out.join("thresholds.csv"),
        "T,m_star",
        res.thresholds.iter().map(|t| format!("{},{}", t.t, t.m_star.map(|m| m.to_string()).unwrap_or_default())),
    )?;
    let mut fit = Table::new();
    fit.insert("inversions".into(), (res.inversions as i64).into());
    fit.insert("thresholds_reached".into(), (res.thresholds.iter().filter(|t| t.m_star.is_some()).count() as i64).into());
    if let Some(f) = &res.fits {
        for (name, l) in [("log", &f.log), ("linear", &f.linear)] {
            let mut t = Table::new();
            t.insert("slope".into(), l.slope.into());
            t.insert("intercept".into(), l.intercept.into());
            t.insert("r_squared".into(), l.r_squared.into());
            t.insert("rss".into(), l.rss.into());
            fit.insert(name.into(), Value::Table(t));
        }
    }
    write_toml(&out.join("fit.toml"), &fit)?;
    let svg = threshold_svg("Sample-size threshold vs context length", &res.thresholds, &grid.m_values, res.fits.as_ref().map(|f| &f.log));
    write_atomic(&out.join("scaling.svg"), svg)?;
    Ok(res)
}

pub fn scaling(cfg: &ScalingConfig, out: &Path, workers: usize) -> Result<i32> {
    let grid = cfg.grid()?;
    let rows = scaling_rows(&grid, workers)?;
    let res = write_scaling_outputs(out, &grid, &rows)?;
    for t in &res.thresholds {
        match t.m_star {
            Some(m) => println!("T = {:>5}: m* = {m}", t.t),
            None => println!("T = {:>5}: not reached", t.t),
        }
    }
    if let Some(f) = &res.fits {
        println!(
            "log fit: m* = {:.3} ln T + {:.3}, R² = {:.4}, rss = {:.3}; linear fit rss = {:.3}; inversions = {}",
            f.log.slope, f.log.intercept, f.log.r_squared, f.log.rss, f.linear.rss, res.inversions
        );
    }
    Ok(0)
}

pub fn parity_curves(cfg: &ParityConfig, workers: usize) -> Result<Vec<ParityCurve>> {
    let spec = cfg.spec()?;
    pool(workers)?
        .install(|| (0..spec.seeds).into_par_iter().map(|i| run_parity_seed(&spec, i)).collect::<attncap_core::Result<Vec<_>>>())
        .map_err(Into::into)
}

pub fn write_parity_outputs(out: &Path, curves: &[ParityCurve]) -> Result<()> {
    write_csv(&out.join("parity.csv"), PARITY_HEADER, curves.iter().flat_map(|c| c.steps.iter().map(|s| s.csv(c.seed))))?;
    write_csv(
        &out.join("transitions.csv"),
        "seed,index_set,transition,pre_transition_acc,steps",
        curves.iter().map(|c| {
            let idx: Vec<String> = c.index_set.iter().map(|i| i.to_string()).collect();
            format!(
                "{},{},{},{},{}",
                c.seed,
                idx.join(" "),
                c.transition.map(|t| t.to_string()).unwrap_or_default(),
                c.pre_transition_acc().map(|a| format!("{a:.6}")).unwrap_or_default(),
                c.steps.len()
            )
        }),
    )
}

pub fn parity(cfg: &ParityConfig, out: &Path, workers: usize) -> Result<i32> {
    let curves = parity_curves(cfg, workers)?;
    write_parity_outputs(out, &curves)?;
    for c in &curves {
        println!(
            "seed {}: index set {:?}, transition {}, pre-transition accuracy {}",
            c.seed,
            c.index_set,
            c.transition.map(|t| format!("at step {t}")).unwrap_or_else(|| "not detected".into()),
            c.pre_transition_acc().map(|a| format!("{a:.4}")).unwrap_or_else(|| "n/a".into())
        );
    }
    Ok(0)
}
