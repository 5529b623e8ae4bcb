use alloc::format;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;

use crate::math;
use crate::rng;
use crate::training::Dataset;
use crate::{Error, Result};

/// Resamples allowed before ambiguity rejection gives up.
pub const REJECTION_BUDGET: usize = 100;

/// Candidate index sets above which the ambiguity check is skipped.
pub const MAX_AMBIGUITY_CANDIDATES: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Conjunction,
    Parity,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Conjunction => "conjunction",
            TaskKind::Parity => "parity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "conjunction" | "and" => Ok(TaskKind::Conjunction),
            "parity" | "xor" => Ok(TaskKind::Parity),
            other => Err(Error::InvalidArgument(format!("unknown task '{other}'"))),
        }
    }
}

/// A sparse Boolean task over i.i.d. Bernoulli(`p`) bits.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub t: usize,
    pub s: usize,
    /// Sorted, distinct, `< t`.
    pub index_set: Vec<usize>,
    pub p: f64,
}

impl TaskSpec {
    /// Task with an explicit index set and the balanced default bias.
    pub fn new(kind: TaskKind, t: usize, index_set: Vec<usize>) -> Result<Self> {
        let mut index_set = index_set;
        index_set.sort_unstable();
        index_set.dedup();
        let s = index_set.len();
        if s == 0 || s > t || index_set.iter().any(|&i| i >= t) {
            return Err(Error::InvalidArgument(format!("index set {index_set:?} invalid for T = {t}")));
        }
        Ok(Self { kind, t, s, index_set, p: default_bias(kind, s) })
    }

    /// Index set drawn uniformly from the `C(T, s)` subsets using `seed`.
    pub fn random(kind: TaskKind, t: usize, s: usize, seed: u64) -> Result<Self> {
        if s == 0 || s > t {
            return Err(Error::InvalidArgument(format!("need 1 <= s <= T, got s={s}, T={t}")));
        }
        let mut r = rng::stream(seed, &[0x1D5]);
        Self::new(kind, t, sample(&mut r, t, s).into_vec())
    }

    pub fn with_bias(mut self, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("bias must lie in (0,1), got {p}")));
        }
        self.p = p;
        Ok(self)
    }

    pub fn label(&self, bits: &[u8]) -> u8 {
        match self.kind {
            TaskKind::Conjunction => u8::from(self.index_set.iter().all(|&i| bits[i] == 1)),
            TaskKind::Parity => self.index_set.iter().fold(0, |acc, &i| acc ^ bits[i]),
        }
    }

    /// `n` i.i.d. labelled rows.
    pub fn sample(&self, n: usize, r: &mut impl Rng) -> Dataset {
        let mut data = Dataset::empty(self.t);
        let mut row = alloc::vec![0u8; self.t];
        for _ in 0..n {
            for b in row.iter_mut() {
                *b = u8::from(r.random::<f64>() < self.p);
            }
            let y = self.label(&row);
            data.push(&row, y);
        }
        data
    }
}

/// `(1/2)^{1/s}` for conjunctions, which makes `P[y = 1] = 1/2`; `1/2` for parity.
pub fn default_bias(kind: TaskKind, s: usize) -> f64 {
    match kind {
        TaskKind::Conjunction => math::exp(-core::f64::consts::LN_2 / s as f64),
        TaskKind::Parity => 0.5,
    }
}

/// What the ambiguity check concluded about a training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ambiguity {
    /// The true index set is the only consistent one of its size.
    Unique,
    /// Another index set of the same size fits every label.
    Ambiguous,
    /// Too many candidate sets to enumerate.
    Skipped { candidates: u64 },
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Enumerates `s`-subsets of `pool` in lexicographic order until `visit` returns true.
fn any_subset(pool: &[usize], s: usize, mut visit: impl FnMut(&[usize]) -> bool) -> bool {
    if s > pool.len() {
        return false;
    }
    let mut idx: Vec<usize> = (0..s).collect();
    let mut chosen: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
    loop {
        if visit(&chosen) {
            return true;
        }
        let mut i = s;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            if idx[i] < pool.len() - s + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..s {
            idx[j] = idx[j - 1] + 1;
        }
        for j in i..s {
            chosen[j] = pool[idx[j]];
        }
    }
}

/// Whether some other index set of size `s` is consistent with every label.
///
/// For conjunctions a competing set must lie inside the positions that equal 1
/// on every positive example, so only subsets of that pool are enumerated. The
/// check is exact whenever the pool has at most
/// [`MAX_AMBIGUITY_CANDIDATES`] subsets.
pub fn ambiguity(task: &TaskSpec, data: &Dataset) -> Ambiguity {
    let pool: Vec<usize> = match task.kind {
        TaskKind::Conjunction => (0..task.t)
            .filter(|&pos| (0..data.len()).all(|i| data.labels[i] == 0 || data.row(i)[pos] == 1))
            .collect(),
        TaskKind::Parity => (0..task.t).collect(),
    };
    let candidates = binomial(pool.len(), task.s);
    if candidates > MAX_AMBIGUITY_CANDIDATES {
        return Ambiguity::Skipped { candidates };
    }
    let other = any_subset(&pool, task.s, |set| {
        if set == &task.index_set[..] {
            return false;
        }
        let probe = TaskSpec { index_set: set.to_vec(), ..task.clone() };
        (0..data.len()).all(|i| probe.label(data.row(i)) == data.labels[i])
    });
    if other {
        Ambiguity::Ambiguous
    } else {
        Ambiguity::Unique
    }
}

/// A generated dataset and how many draws it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub data: Dataset,
    pub draws: usize,
    pub ambiguity: Option<Ambiguity>,
}

/// `n` rows from stream `seed`. With `reject_ambiguous`, conjunction training
/// sets are redrawn while another index set of size `s` fits all labels. The
/// check is skipped (and reported as such) when the candidate pool is too large.
pub fn gen_dataset(task: &TaskSpec, n: usize, seed: u64, reject_ambiguous: bool) -> Result<Generated> {
    let (generated, exhausted) = gen_dataset_lenient(task, n, seed, reject_ambiguous)?;
    if exhausted {
        return Err(Error::RejectionBudget(REJECTION_BUDGET));
    }
    Ok(generated)
}

/// Like [`gen_dataset`], but an exhausted rejection budget returns the last
/// (ambiguous) draw together with `true` instead of an error.
pub fn gen_dataset_lenient(task: &TaskSpec, n: usize, seed: u64, reject_ambiguous: bool) -> Result<(Generated, bool)> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be at least 1".into()));
    }
    let mut r = rng::stream(seed, &[0xDA7A]);
    let check = reject_ambiguous && task.kind == TaskKind::Conjunction;
    let mut draw = 0;
    loop {
        draw += 1;
        let data = task.sample(n, &mut r);
        if !check {
            return Ok((Generated { data, draws: draw, ambiguity: None }, false));
        }
        let a = ambiguity(task, &data);
        if a != Ambiguity::Ambiguous || draw == REJECTION_BUDGET {
            let exhausted = a == Ambiguity::Ambiguous;
            return Ok((Generated { data, draws: draw, ambiguity: Some(a) }, exhausted));
        }
    }
}
