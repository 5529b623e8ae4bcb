use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{dot, norm2};
use crate::{Error, Result};

const MAX_CONSECUTIVE_REJECTIONS: usize = 1000;

/// Unit vectors `v_1..v_T'` in `ℝ^d` with pairwise overlaps at most `delta`,
/// plus three reserved directions (`e_0`, `e_1`, `v_CLS`) that are exactly
/// orthogonal to each other and to every `v_i`.
///
/// The reserved directions are the last three coordinate axes; the `v_i` live
/// in the span of the first `d - 3` axes.
#[derive(Debug, Clone, PartialEq)]
pub struct NearOrthonormalBasis {
    dim: usize,
    delta: f64,
    vectors: Vec<Vec<f64>>,
}

impl NearOrthonormalBasis {
    /// Wrap explicit vectors after checking the invariants.
    pub fn from_vectors(dim: usize, delta: f64, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidArgument("basis dimension must be at least 3".into()));
        }
        let b = Self { dim, delta, vectors };
        b.check()?;
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The `i`-th free vector (0-based).
    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    fn axis(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        v[k] = 1.0;
        v
    }

    /// Token embedding for bit 0.
    pub fn e0(&self) -> Vec<f64> {
        self.axis(self.dim - 3)
    }

    /// Token embedding for bit 1.
    pub fn e1(&self) -> Vec<f64> {
        self.axis(self.dim - 2)
    }

    /// Embedding of the `[CLS]` position.
    pub fn cls(&self) -> Vec<f64> {
        self.axis(self.dim - 1)
    }

    /// Largest `|v_i · v_j|` over distinct pairs.
    pub fn max_overlap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.vectors.len() {
            for j in 0..i {
                worst = worst.max(dot(&self.vectors[i], &self.vectors[j]).abs());
            }
        }
        worst
    }

    /// Verify unit norms, the overlap bound and orthogonality to the reserved slots.
    pub fn check(&self) -> Result<()> {
        for (i, v) in self.vectors.iter().enumerate() {
            if v.len() != self.dim {
                return Err(Error::Shape(alloc::format!("basis vector {i} has length {}", v.len())));
            }
            if (norm2(v) - 1.0).abs() > 1e-10 {
                return Err(Error::Precondition(alloc::format!("basis vector {i} is not unit length")));
            }
            for r in self.dim - 3..self.dim {
                if v[r].abs() > 1e-10 {
                    return Err(Error::Precondition(alloc::format!("basis vector {i} touches a reserved direction")));
                }
            }
        }
        if self.max_overlap() > self.delta + 1e-12 {
            return Err(Error::Precondition(alloc::format!(
                "max overlap {} exceeds delta {}",
                self.max_overlap(),
                self.delta
            )));
        }
        Ok(())
    }
}

fn gaussian_unit(rng: &mut ChaCha8Rng, free: usize, dim: usize) -> Vec<f64> {
    loop {
        let mut v = vec![0.0; dim];
        for x in v.iter_mut().take(free) {
            *x = StandardNormal.sample(rng);
        }
        let n = norm2(&v);
        if n > 1e-12 {
            for x in v.iter_mut() {
                *x /= n;
            }
            return v;
        }
    }
}

/// Sample a near-orthonormal basis of `count` vectors in `ℝ^dim` with overlap at most `delta`.
///
/// Vectors are normalized Gaussians in the span of the first `dim - 3` axes,
/// accepted one at a time; a vector is redrawn while it overlaps an accepted
/// one by more than `delta`. `delta = 0` builds an exactly orthonormal set by
/// Gram-Schmidt instead.
pub fn make_basis(count: usize, dim: usize, delta: f64, seed: u64) -> Result<NearOrthonormalBasis> {
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::InvalidArgument(alloc::format!("delta {delta} outside [0, 1/2)")));
    }
    if dim < 3 {
        return Err(Error::InvalidArgument("basis dimension must be at least 3".into()));
    }
    let infeasible = Error::BasisInfeasible { count, dim, delta };
    let free = dim - 3;
    if count > 0 && free == 0 {
        return Err(infeasible);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    if delta == 0.0 {
        if count > free {
            return Err(infeasible);
        }
        while vectors.len() < count {
            let mut v = gaussian_unit(&mut rng, free, dim);
            for u in &vectors {
                let c = dot(&v, u);
                super::axpy(-c, u, &mut v);
            }
            // Second pass keeps the result orthogonal to round-off.
            for u in &vectors {
                let c = dot(&v, u);
                super::axpy(-c, u, &mut v);
            }
            let n = norm2(&v);
            if n < 1e-6 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= n);
            vectors.push(v);
        }
    } else {
        while vectors.len() < count {
            let mut accepted = false;
            for _ in 0..MAX_CONSECUTIVE_REJECTIONS {
                let v = gaussian_unit(&mut rng, free, dim);
                if vectors.iter().all(|u| dot(&v, u).abs() <= delta) {
                    vectors.push(v);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(infeasible);
            }
        }
    }
    NearOrthonormalBasis::from_vectors(dim, delta, vectors)
}
