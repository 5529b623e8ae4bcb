use alloc::vec;
use alloc::vec::Vec;

use super::{dot, norm2, Matrix};
use crate::{math, Error, Result};

/// Exponent of an ℓp norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lp {
    One,
    Two,
    Inf,
}

impl Lp {
    fn apply(self, v: impl Iterator<Item = f64>) -> f64 {
        match self {
            Lp::One => v.map(f64::abs).sum(),
            Lp::Two => math::sqrt(v.map(|x| x * x).sum()),
            Lp::Inf => v.fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

/// (p,q) matrix norm: the p-norm of each row, then the q-norm of those values.
///
/// `matrix_norm_pq(X, Two, Inf)` is the largest row norm of `X`.
pub fn matrix_norm_pq(m: &Matrix, p: Lp, q: Lp) -> f64 {
    q.apply((0..m.rows()).map(|i| p.apply(m.row(i).iter().copied())))
}

const SPECTRAL_TOL: f64 = 1e-10;
const SPECTRAL_CAP: usize = 10_000;

/// Largest singular value by power iteration on `MᵀM`.
///
/// The iteration starts from the normalized all-ones vector. If that vector is
/// annihilated by `M` while `M` is nonzero, it restarts from the unit vector of
/// the heaviest column. Convergence is declared when the Rayleigh quotient
/// changes by at most `1e-10` relative.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    let n = m.cols();
    if n == 0 || m.rows() == 0 {
        return Err(Error::InvalidArgument("spectral_norm of an empty matrix".into()));
    }
    if m.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let start = vec![1.0 / math::sqrt(n as f64); n];
    match power_iterate(m, start)? {
        Some(s) => Ok(s),
        None => {
            let heaviest = (0..n)
                .map(|j| (j, m.col(j).iter().map(|x| x * x).sum::<f64>()))
                .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best })
                .0;
            let mut e = vec![0.0; n];
            e[heaviest] = 1.0;
            Ok(power_iterate(m, e)?.unwrap_or(0.0))
        }
    }
}

/// Returns `None` when the iterate collapses to zero.
fn power_iterate(m: &Matrix, mut v: Vec<f64>) -> Result<Option<f64>> {
    let mut prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for _ in 0..SPECTRAL_CAP {
        let mv = m.matvec(&v);
        let lambda = dot(&mv, &mv);
        let w = m.vecmat(&mv);
        let wn = norm2(&w);
        if wn == 0.0 {
            return Ok(None);
        }
        if prev.is_finite() {
            residual = (lambda - prev).abs() / lambda.max(f64::MIN_POSITIVE);
            if residual <= SPECTRAL_TOL {
                return Ok(Some(math::sqrt(lambda)));
            }
        }
        prev = lambda;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
    }
    Err(Error::SpectralNotConverged { iterations: SPECTRAL_CAP, residual })
}

/// Projection onto the closed unit Euclidean ball.
pub fn project_unit_ball(v: &[f64]) -> Vec<f64> {
    let n = norm2(v);
    if n <= 1.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

/// Row-wise [`project_unit_ball`].
pub fn project_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        let p = project_unit_ball(m.row(i));
        out.row_mut(i).copy_from_slice(&p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pq_examples() {
        let m = Matrix::from_rows(&[[3.0, 4.0], [0.0, 0.0]]).unwrap();
        assert_eq!(matrix_norm_pq(&m, Lp::Two, Lp::One), 5.0);
        assert_eq!(matrix_norm_pq(&m, Lp::Two, Lp::Inf), 5.0);
        assert_eq!(matrix_norm_pq(&Matrix::identity(2), Lp::Two, Lp::One), 2.0);
        assert_eq!(matrix_norm_pq(&m, Lp::One, Lp::One), 7.0);
        assert_eq!(matrix_norm_pq(&m, Lp::Inf, Lp::Two), 4.0);
    }

    #[test]
    fn spectral_examples() {
        assert_abs_diff_eq!(spectral_norm(&Matrix::identity(5)).unwrap(), 1.0, epsilon = 1e-12);
        let d = Matrix::from_rows(&[[3.0, 0.0], [0.0, 4.0]]).unwrap();
        assert_abs_diff_eq!(spectral_norm(&d).unwrap(), 4.0, epsilon = 1e-9);
        let s = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap();
        let expected = ((3.0 + 5f64.sqrt()) / 2.0).sqrt();
        assert_abs_diff_eq!(spectral_norm(&s).unwrap(), expected, epsilon = 1e-9);
        assert_eq!(spectral_norm(&Matrix::zeros(2, 3)).unwrap(), 0.0);
    }

    #[test]
    fn spectral_recovers_when_start_vector_is_in_the_kernel() {
        let m = Matrix::from_rows(&[[1.0, -1.0], [1.0, -1.0]]).unwrap();
        assert_abs_diff_eq!(spectral_norm(&m).unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_unit_ball(&[3.0, 4.0]), vec![0.6, 0.8]);
        assert_eq!(project_unit_ball(&[0.3, 0.4]), vec![0.3, 0.4]);
        assert_eq!(project_unit_ball(&[0.0, 0.0]), vec![0.0, 0.0]);
    }
}
