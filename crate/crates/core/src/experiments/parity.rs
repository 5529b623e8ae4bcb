use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::tasks::{TaskKind, TaskSpec};
use crate::rng::{self, child_seed};
use crate::training::{AdamConfig, ModelConfig, TrainState};
use crate::{Error, Result};

/// Streaming sparse-parity run: every step draws a fresh batch, measures
/// eval-mode accuracy on it, then takes one Adam step on the same batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ParitySpec {
    pub t: usize,
    pub s: usize,
    pub batch: usize,
    /// Maximum number of steps per seed.
    pub budget: usize,
    pub seeds: usize,
    pub root_seed: u64,
    /// Trailing window of the transition detector.
    pub window: usize,
    pub level: f64,
    /// Steps to keep training after the transition is detected.
    pub tail: usize,
    pub adam: AdamConfig,
    /// Model template; its `t` is overwritten.
    pub model: ModelConfig,
}

impl ParitySpec {
    pub fn new(t: usize, s: usize) -> Self {
        Self {
            t,
            s,
            batch: 512,
            budget: 50_000,
            seeds: 10,
            root_seed: 0,
            window: 50,
            level: 0.99,
            tail: 0,
            adam: AdamConfig::default(),
            model: ModelConfig::standard(t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.seeds == 0 || self.window == 0 {
            return Err(Error::InvalidArgument("batch, seeds and window must be positive".into()));
        }
        if self.s == 0 || self.s > self.t {
            return Err(Error::InvalidArgument(format!("need 1 <= s <= T, got s={}, T={}", self.s, self.t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityStep {
    pub step: usize,
    pub loss: f64,
    pub acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityCurve {
    pub seed: usize,
    pub index_set: Vec<usize>,
    pub steps: Vec<ParityStep>,
    /// First step whose trailing-window accuracy reaches the level.
    pub transition: Option<usize>,
    pub window: usize,
}

impl ParityCurve {
    /// Mean accuracy over the first half of the steps that precede the
    /// detection window (over the first half of all steps when there was no
    /// transition).
    pub fn pre_transition_acc(&self) -> Option<f64> {
        let end = match self.transition {
            Some(tr) => (tr + 1).saturating_sub(self.window) / 2,
            None => self.steps.len() / 2,
        };
        if end == 0 {
            return None;
        }
        Some(self.steps[..end].iter().map(|s| s.acc).sum::<f64>() / end as f64)
    }
}

pub const PARITY_HEADER: &str = "seed,step,loss,acc";

impl ParityStep {
    pub fn csv(&self, seed: usize) -> String {
        format!("{seed},{},{:.8},{:.6}", self.step, self.loss, self.acc)
    }
}

/// Runs seed number `seed_index` of `spec`. The index set, initialization and
/// sample stream all derive from `child_seed(root_seed, [seed_index])`.
pub fn run_parity_seed(spec: &ParitySpec, seed_index: usize) -> Result<ParityCurve> {
    spec.validate()?;
    let seed = child_seed(spec.root_seed, &[seed_index as u64]);
    let task = TaskSpec::random(TaskKind::Parity, spec.t, spec.s, seed)?;
    let mut cfg = spec.model.clone();
    cfg.t = spec.t;
    let mut state = TrainState::new(cfg, child_seed(seed, &[2]))?;
    let mut samples = rng::stream(seed, &[3]);
    let mut steps = Vec::new();
    let mut accs = Vec::new();
    let mut transition = None;
    let mut stop_at = spec.budget;
    for step in 0..spec.budget {
        if step >= stop_at {
            break;
        }
        let batch = task.sample(spec.batch, &mut samples);
        let acc = state.accuracy(&batch);
        let loss = state.train_step(&batch, &spec.adam);
        steps.push(ParityStep { step, loss, acc });
        accs.push(acc);
        if transition.is_none() && accs.len() >= spec.window {
            let tail = &accs[accs.len() - spec.window..];
            if tail.iter().sum::<f64>() / spec.window as f64 >= spec.level {
                transition = Some(step);
                stop_at = step + 1 + spec.tail;
            }
        }
    }
    Ok(ParityCurve { seed: seed_index, index_set: task.index_set, steps, transition, window: spec.window })
}

/// All seeds of `spec`, in seed order.
pub fn run_parity(spec: &ParitySpec) -> Result<Vec<ParityCurve>> {
    (0..spec.seeds).map(|i| run_parity_seed(spec, i)).collect()
}
