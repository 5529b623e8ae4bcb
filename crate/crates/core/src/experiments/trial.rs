use alloc::format;
use alloc::vec::Vec;

use super::analysis::{inversions, scaling_fits, thresholds, CellRate, ScalingFits, Threshold};
use super::tasks::{gen_dataset_lenient, Ambiguity, TaskKind, TaskSpec};
use crate::rng::child_seed;
use crate::training::{train_until, AdamConfig, ModelConfig, Params, TrainOptions, TrainState, TrialRecord};
use crate::{Error, Result};

/// Training knobs shared by every trial of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialKnobs {
    pub restarts: usize,
    pub max_iters: usize,
    pub eval_every: usize,
    /// Success means best holdout accuracy strictly above this.
    pub target_acc: f64,
    pub holdout: usize,
    pub reject_ambiguous: bool,
    pub adam: AdamConfig,
    /// Model template; its `t` is overwritten by the task length.
    pub model: ModelConfig,
}

impl Default for TrialKnobs {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_iters: 500,
            eval_every: 10,
            target_acc: 0.99,
            holdout: 2000,
            reject_ambiguous: true,
            adam: AdamConfig::default(),
            model: ModelConfig::standard(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub t_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub s: usize,
    pub kind: TaskKind,
    /// Minimum success rate defining `m*(T)`.
    pub rate_floor: f64,
    pub seed: u64,
    pub knobs: TrialKnobs,
}

impl GridSpec {
    /// `T ∈ {16, 32, 64, 128, 256}`, `m ∈ {20, 30, …, 200}`, 10 trials of 3 restarts.
    pub fn desk() -> Self {
        Self {
            t_values: alloc::vec![16, 32, 64, 128, 256],
            m_values: (2..=20).map(|i| 10 * i).collect(),
            trials: 10,
            s: 3,
            kind: TaskKind::Conjunction,
            rate_floor: 0.8,
            seed: 0,
            knobs: TrialKnobs::default(),
        }
    }

    /// `T ∈ {100, 150, …, 1100}`, `m ∈ {50, 60, …, 200}`, 40 trials of 5 restarts,
    /// 1000 iterations and a holdout of 10⁴.
    pub fn paper_scale() -> Self {
        let mut g = Self::desk();
        g.t_values = (2..=22).map(|i| 50 * i).collect();
        g.m_values = (5..=20).map(|i| 10 * i).collect();
        g.trials = 40;
        g.knobs.restarts = 5;
        g.knobs.max_iters = 1000;
        g.knobs.holdout = 10_000;
        g
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.knobs.restarts == 0 || self.knobs.holdout == 0 {
            return Err(Error::InvalidArgument("trials, restarts and holdout must be positive".into()));
        }
        if self.t_values.iter().chain(&self.m_values).any(|&v| v == 0) {
            return Err(Error::InvalidArgument("grid values must be positive".into()));
        }
        if self.t_values.iter().any(|&t| t < self.s) || self.s == 0 {
            return Err(Error::InvalidArgument(format!("every T must be at least s = {}", self.s)));
        }
        if !(self.knobs.target_acc > 0.5 && self.knobs.target_acc <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "success threshold must lie in (0.5, 1], got {}",
                self.knobs.target_acc
            )));
        }
        if !(self.rate_floor > 0.0 && self.rate_floor <= 1.0) {
            return Err(Error::InvalidArgument(format!("rate floor must lie in (0, 1], got {}", self.rate_floor)));
        }
        Ok(())
    }

    /// Every `(T, m, trial)` cell in output order.
    pub fn jobs(&self) -> Vec<TrialJob> {
        let mut out = Vec::with_capacity(self.t_values.len() * self.m_values.len() * self.trials);
        for &t in &self.t_values {
            for &m in &self.m_values {
                for trial in 0..self.trials {
                    out.push(TrialJob { t, m, trial, seed: child_seed(self.seed, &[t as u64, m as u64, trial as u64]) });
                }
            }
        }
        out
    }

    pub fn run_job(&self, job: &TrialJob) -> Result<ScalingRow> {
        let task = TaskSpec::random(self.kind, job.t, self.s, job.seed)?;
        let out = run_trial(&task, job.m, &self.knobs, job.seed)?;
        Ok(ScalingRow {
            t: job.t,
            m: job.m,
            trial: job.trial,
            restart_used: out.restart_used,
            iters: out.record.iters,
            best_val_acc: out.record.best_val_acc,
            success: out.record.success,
            seed: job.seed,
        })
    }
}

/// One cell of a grid together with its derived seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialJob {
    pub t: usize,
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
}

/// One row of the scaling CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub t: usize,
    pub m: usize,
    pub trial: usize,
    /// Number of restarts consumed (1-based).
    pub restart_used: usize,
    pub iters: usize,
    pub best_val_acc: f64,
    pub success: bool,
    pub seed: u64,
}

pub const SCALING_HEADER: &str = "T,m,trial,restart_used,iters,best_val_acc,success,seed";

impl ScalingRow {
    pub fn csv(&self) -> alloc::string::String {
        format!(
            "{},{},{},{},{},{:.6},{},{}",
            self.t,
            self.m,
            self.trial,
            self.restart_used,
            self.iters,
            self.best_val_acc,
            u8::from(self.success),
            self.seed
        )
    }
}

/// Best-of-restarts outcome of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub restart_used: usize,
    pub draws: usize,
    pub ambiguity: Option<Ambiguity>,
    /// Rejection ran out of budget and the last ambiguous draw was used.
    pub rejection_exhausted: bool,
    /// Final parameters of the reported restart.
    pub params: Params,
}

/// Trains on `m` fresh samples of `task`, restarting with fresh initialization
/// and dropout until a restart succeeds or `knobs.restarts` are spent. The
/// training set (stream `[0]`) and holdout (stream `[1]`) are shared by all
/// restarts; restart `r` uses seed `child_seed(seed, [2, r])`. The reported
/// record is the first success, else the restart with the best holdout accuracy.
pub fn run_trial(task: &TaskSpec, m: usize, knobs: &TrialKnobs, seed: u64) -> Result<TrialOutcome> {
    if knobs.restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let (train, exhausted) = gen_dataset_lenient(task, m, child_seed(seed, &[0]), knobs.reject_ambiguous)?;
    let (holdout, _) = gen_dataset_lenient(task, knobs.holdout, child_seed(seed, &[1]), false)?;
    let mut cfg = knobs.model.clone();
    cfg.t = task.t;
    let opts = TrainOptions {
        max_iters: knobs.max_iters,
        eval_every: knobs.eval_every,
        target_acc: knobs.target_acc,
        stop_on_success: true,
        adam: knobs.adam,
    };
    let mut best: Option<(TrialRecord, usize, Params)> = None;
    for r in 0..knobs.restarts {
        let mut state = TrainState::new(cfg.clone(), child_seed(seed, &[2, r as u64]))?;
        let rec = train_until(&mut state, &train.data, &holdout.data, &opts);
        let success = rec.success;
        if success || best.as_ref().is_none_or(|(b, _, _)| rec.best_val_acc > b.best_val_acc) {
            best = Some((rec, r + 1, state.params));
        }
        if success {
            break;
        }
    }
    let (record, used, params) = best.expect("at least one restart ran");
    let restart_used = if record.success { used } else { knobs.restarts };
    Ok(TrialOutcome {
        record,
        restart_used,
        draws: train.draws,
        ambiguity: train.ambiguity,
        rejection_exhausted: exhausted,
        params,
    })
}

/// Aggregated grid outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    pub cells: Vec<CellRate>,
    pub thresholds: Vec<Threshold>,
    /// `None` when fewer than two thresholds were reached.
    pub fits: Option<ScalingFits>,
    pub inversions: usize,
}

/// Success rates, thresholds, fits and inversion count from grid rows.
pub fn summarize(grid: &GridSpec, rows: &[ScalingRow]) -> ScalingResult {
    let mut cells = Vec::new();
    for &t in &grid.t_values {
        for &m in &grid.m_values {
            let here = rows.iter().filter(|r| r.t == t && r.m == m);
            let (mut trials, mut successes) = (0, 0);
            for r in here {
                trials += 1;
                successes += usize::from(r.success);
            }
            cells.push(CellRate { t, m, successes, trials });
        }
    }
    let ths = thresholds(&cells, &grid.t_values, grid.rate_floor);
    ScalingResult { fits: scaling_fits(&ths).ok(), inversions: inversions(&ths), thresholds: ths, cells }
}
