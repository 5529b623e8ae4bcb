use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use super::pipeline::{NormCertificate, Pipeline};
use crate::{rng, Error, Result};

/// Largest context length enumerated exhaustively.
pub const MAX_EXHAUSTIVE_T: usize = 22;

/// Which inputs a verification run visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingPolicy {
    /// All `2^T` inputs.
    AllInputs,
    /// Every relevant pattern, each with `samples` random irrelevant assignments.
    RelevantExhaustive { samples: usize, seed: u64 },
}

impl SamplingPolicy {
    pub fn input_count(&self, t: usize, s: usize) -> u64 {
        match *self {
            Self::AllInputs => 1u64 << t,
            Self::RelevantExhaustive { samples, .. } => (1u64 << s) * samples as u64,
        }
    }

    /// The `j`-th input of the policy; a pure function of `j`.
    pub fn input(&self, j: u64, t: usize, index_set: &[usize]) -> Vec<bool> {
        match *self {
            Self::AllInputs => (0..t).map(|p| (j >> p) & 1 == 1).collect(),
            Self::RelevantExhaustive { samples, seed } => {
                let pattern = j / samples as u64;
                let mut r = rng::stream(seed, &[j]);
                let mut b: Vec<bool> = (0..t).map(|_| r.random()).collect();
                for (k, &i) in index_set.iter().enumerate() {
                    b[i] = (pattern >> k) & 1 == 1;
                }
                b
            }
        }
    }
}

/// Error statistics over a block of inputs; blocks combine with [`PartialReport::merge`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialReport {
    pub max_abs_error: f64,
    pub inputs_checked: u64,
    /// Smallest input index attaining `max_abs_error`.
    pub worst_input: Option<u64>,
}

impl PartialReport {
    pub fn empty() -> Self {
        Self { max_abs_error: 0.0, inputs_checked: 0, worst_input: None }
    }

    /// Associative and commutative combination.
    pub fn merge(self, other: Self) -> Self {
        let worst = match (self.worst_input, other.worst_input) {
            (None, w) | (w, None) => w,
            (Some(a), Some(b)) => Some(if self.max_abs_error > other.max_abs_error {
                a
            } else if other.max_abs_error > self.max_abs_error {
                b
            } else {
                a.min(b)
            }),
        };
        Self {
            max_abs_error: self.max_abs_error.max(other.max_abs_error),
            inputs_checked: self.inputs_checked + other.inputs_checked,
            worst_input: worst,
        }
    }
}

/// Outcome of checking a pipeline against its target.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionReport {
    pub max_abs_error: f64,
    pub inputs_checked: u64,
    pub worst_input: Option<u64>,
    pub tolerance: f64,
    pub certificates: Vec<NormCertificate>,
}

impl ConstructionReport {
    pub fn from_partial(p: PartialReport, pipeline: &Pipeline) -> Self {
        Self {
            max_abs_error: p.max_abs_error,
            inputs_checked: p.inputs_checked,
            worst_input: p.worst_input,
            tolerance: pipeline.tolerance(),
            certificates: pipeline.certificates.clone(),
        }
    }

    pub fn approximation_pass(&self) -> bool {
        self.max_abs_error <= self.tolerance
    }

    pub fn passed(&self) -> bool {
        self.approximation_pass() && self.certificates.iter().all(|c| c.pass)
    }
}

fn check_policy(pipeline: &Pipeline, policy: &SamplingPolicy) -> Result<()> {
    let t = pipeline.context_len();
    match policy {
        SamplingPolicy::AllInputs if t > MAX_EXHAUSTIVE_T => {
            Err(Error::InvalidArgument(format!("exhaustive verification is capped at T = {MAX_EXHAUSTIVE_T}, got {t}")))
        }
        SamplingPolicy::RelevantExhaustive { samples: 0, .. } => Err(Error::InvalidArgument("need at least one sample".into())),
        _ => Ok(()),
    }
}

/// Error statistics over the inputs with indices in `range`.
pub fn verify_range(pipeline: &Pipeline, policy: &SamplingPolicy, range: Range<u64>) -> Result<PartialReport> {
    check_policy(pipeline, policy)?;
    let t = pipeline.context_len();
    let mut report = PartialReport::empty();
    for j in range {
        let b = policy.input(j, t, pipeline.index_set());
        let y = pipeline.forward(&b)?;
        let target = pipeline.target(&b);
        let err = y.iter().zip(&target).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let err = if err.is_nan() { f64::INFINITY } else { err };
        report = report.merge(PartialReport { max_abs_error: err, inputs_checked: 1, worst_input: Some(j) });
    }
    Ok(report)
}

/// Sequential verification over the whole policy.
pub fn verify_exhaustive(pipeline: &Pipeline, policy: &SamplingPolicy) -> Result<ConstructionReport> {
    let total = policy.input_count(pipeline.context_len(), pipeline.index_set().len());
    let partial = verify_range(pipeline, policy, 0..total)?;
    Ok(ConstructionReport::from_partial(partial, pipeline))
}

/// Split `0..total` into `parts` contiguous blocks (for parallel callers).
pub fn blocks(total: u64, parts: usize) -> Vec<Range<u64>> {
    let parts = parts.max(1) as u64;
    let step = total.div_ceil(parts).max(1);
    let mut out = vec![];
    let mut lo = 0;
    while lo < total {
        out.push(lo..(lo + step).min(total));
        lo += step;
    }
    out
}
