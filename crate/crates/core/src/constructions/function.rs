use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::{rng, Error, Result};

/// Structural class of a sparse Boolean function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    /// Depends only on the popcount of the relevant bits and is monotone in it.
    MonotoneSymmetric,
    /// Depends only on the popcount of the relevant bits.
    Symmetric,
    General,
}

impl FunctionKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::MonotoneSymmetric => "monotone_symmetric",
            Self::Symmetric => "symmetric",
            Self::General => "general",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "monotone_symmetric" => Some(Self::MonotoneSymmetric),
            "symmetric" => Some(Self::Symmetric),
            "general" => Some(Self::General),
            _ => None,
        }
    }

    pub fn is_symmetric(self) -> bool {
        !matches!(self, Self::General)
    }
}

/// A function `{0,1}^T → ℝ` that reads only the bits at `index_set`.
///
/// `table[p]` is the value for relevant pattern `p`, where bit `j` of `p` is
/// the input bit at `index_set[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBooleanFunction {
    t: usize,
    index_set: Vec<usize>,
    table: Vec<f64>,
    kind: FunctionKind,
}

impl SparseBooleanFunction {
    pub fn new(t: usize, mut index_set: Vec<usize>, table: Vec<f64>, kind: FunctionKind) -> Result<Self> {
        index_set.sort_unstable();
        if index_set.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("index set has repeated positions".into()));
        }
        if index_set.last().is_some_and(|&i| i >= t) {
            return Err(Error::InvalidArgument(format!("index set exceeds context length {t}")));
        }
        let s = index_set.len();
        if s >= 63 || table.len() != 1usize << s {
            return Err(Error::Shape(format!("table must have 2^{s} entries, got {}", table.len())));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("table values must be finite".into()));
        }
        let f = Self { t, index_set, table, kind };
        if kind.is_symmetric() {
            let by_r = f.values_by_popcount().ok_or_else(|| Error::Precondition("table is not symmetric".into()))?;
            if kind == FunctionKind::MonotoneSymmetric {
                let up = by_r.windows(2).all(|w| w[0] <= w[1]);
                let down = by_r.windows(2).all(|w| w[0] >= w[1]);
                if !(up || down) {
                    return Err(Error::Precondition("table is not monotone in the popcount".into()));
                }
            }
        }
        Ok(f)
    }

    /// Symmetric function with value `values[r]` at popcount `r`.
    pub fn from_popcount(t: usize, index_set: Vec<usize>, values: &[f64], kind: FunctionKind) -> Result<Self> {
        let s = index_set.len();
        if values.len() != s + 1 {
            return Err(Error::Shape(format!("need {} popcount values, got {}", s + 1, values.len())));
        }
        let table = (0..1usize << s).map(|p| values[p.count_ones() as usize]).collect();
        Self::new(t, index_set, table, kind)
    }

    /// Conjunction of the relevant bits (1.0 / 0.0).
    pub fn and(t: usize, index_set: Vec<usize>) -> Result<Self> {
        let s = index_set.len();
        let values: Vec<f64> = (0..=s).map(|r| if r == s { 1.0 } else { 0.0 }).collect();
        Self::from_popcount(t, index_set, &values, FunctionKind::MonotoneSymmetric)
    }

    /// Parity of the relevant bits (1.0 / 0.0).
    pub fn parity(t: usize, index_set: Vec<usize>) -> Result<Self> {
        let s = index_set.len();
        let values: Vec<f64> = (0..=s).map(|r| (r % 2) as f64).collect();
        Self::from_popcount(t, index_set, &values, FunctionKind::Symmetric)
    }

    /// Majority (1.0 when more than half of the relevant bits are set).
    pub fn majority(t: usize, index_set: Vec<usize>) -> Result<Self> {
        let s = index_set.len();
        let values: Vec<f64> = (0..=s).map(|r| if 2 * r > s { 1.0 } else { 0.0 }).collect();
        Self::from_popcount(t, index_set, &values, FunctionKind::MonotoneSymmetric)
    }

    /// General function with i.i.d. uniform table entries in `[-1, 1]` on a random index set.
    pub fn random(t: usize, s: usize, seed: u64) -> Result<Self> {
        if s > t {
            return Err(Error::InvalidArgument(format!("s = {s} exceeds T = {t}")));
        }
        let mut r = rng::stream(seed, &[0x5b_f0]);
        let index_set = rand::seq::index::sample(&mut r, t, s).into_vec();
        let table = (0..1usize << s).map(|_| r.random_range(-1.0..=1.0)).collect();
        Self::new(t, index_set, table, FunctionKind::General)
    }

    pub fn context_len(&self) -> usize {
        self.t
    }

    pub fn sparsity(&self) -> usize {
        self.index_set.len()
    }

    pub fn index_set(&self) -> &[usize] {
        &self.index_set
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    /// Relevant pattern index of a full input.
    pub fn pattern(&self, b: &[bool]) -> usize {
        self.index_set.iter().enumerate().map(|(j, &i)| (b[i] as usize) << j).sum()
    }

    pub fn eval(&self, b: &[bool]) -> f64 {
        self.table[self.pattern(b)]
    }

    /// Values by popcount when the table is symmetric.
    pub fn values_by_popcount(&self) -> Option<Vec<f64>> {
        let s = self.index_set.len();
        let mut out: Vec<Option<f64>> = alloc::vec![None; s + 1];
        for (p, &v) in self.table.iter().enumerate() {
            let slot = &mut out[p.count_ones() as usize];
            match slot {
                None => *slot = Some(v),
                Some(w) if *w != v => return None,
                _ => {}
            }
        }
        out.into_iter().collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.table.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
