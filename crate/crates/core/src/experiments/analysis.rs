use alloc::vec::Vec;

use crate::{math, Error, Result};

/// Ordinary least squares `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Sum of squared residuals.
    pub rss: f64,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("a fit needs at least two paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| {
        let r = b - slope * a - intercept;
        r * r
    }).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - rss / syy };
    Ok(LinearFit { slope, intercept, r_squared, rss })
}

/// Success rate of one `(T, m)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRate {
    pub t: usize,
    pub m: usize,
    pub successes: usize,
    pub trials: usize,
}

impl CellRate {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Binomial standard error of [`CellRate::rate`].
    pub fn standard_error(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.rate();
        math::sqrt(p * (1.0 - p) / self.trials as f64)
    }
}

/// `m*(T)`: the smallest grid `m` whose success rate reaches `floor`, or
/// `None` ("not reached").
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub t: usize,
    pub m_star: Option<usize>,
}

/// Thresholds for every `T` in `t_grid`, reading rates from `cells`.
pub fn thresholds(cells: &[CellRate], t_grid: &[usize], floor: f64) -> Vec<Threshold> {
    t_grid
        .iter()
        .map(|&t| {
            let mut row: Vec<&CellRate> = cells.iter().filter(|c| c.t == t).collect();
            row.sort_by_key(|c| c.m);
            Threshold { t, m_star: row.iter().find(|c| c.rate() >= floor).map(|c| c.m) }
        })
        .collect()
}

/// Adjacent pairs (in increasing `T`) where the reached threshold drops.
pub fn inversions(ths: &[Threshold]) -> usize {
    let reached: Vec<usize> = ths.iter().filter_map(|t| t.m_star).collect();
    reached.windows(2).filter(|w| w[1] < w[0]).count()
}

/// Fits of reached thresholds against `ln T` and against `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFits {
    pub log: LinearFit,
    pub linear: LinearFit,
}

pub fn scaling_fits(ths: &[Threshold]) -> Result<ScalingFits> {
    let pts: Vec<(f64, f64)> = ths.iter().filter_map(|t| t.m_star.map(|m| (t.t as f64, m as f64))).collect();
    let ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ms: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let logs: Vec<f64> = ts.iter().map(|&t| math::ln(t)).collect();
    Ok(ScalingFits { log: least_squares(&logs, &ms)?, linear: least_squares(&ts, &ms)? })
}

/// First index where the trailing `window`-mean of `acc` reaches `level`.
pub fn detect_transition(acc: &[f64], window: usize, level: f64) -> Option<usize> {
    if window == 0 || acc.len() < window {
        return None;
    }
    let mut sum: f64 = acc[..window].iter().sum();
    if sum / window as f64 >= level {
        return Some(window - 1);
    }
    for i in window..acc.len() {
        sum += acc[i] - acc[i - window];
        if sum / window as f64 >= level {
            return Some(i);
        }
    }
    None
}
