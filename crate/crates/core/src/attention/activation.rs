use crate::math;

/// Position-wise activation applied after attention mixing. All variants satisfy σ(0) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Identity,
    Relu,
    /// Exact Gaussian-CDF GeLU, `x Φ(x)`.
    Gelu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Gelu => x * normal_cdf(x),
        }
    }

    /// Derivative (ReLU uses 0 at the kink).
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => normal_cdf(x) + x * normal_pdf(x),
        }
    }

    /// Lipschitz constant; GeLU uses 1.13, which bounds sup |σ'| ≈ 1.129.
    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Identity | Activation::Relu => 1.0,
            Activation::Gelu => 1.13,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "gelu" => Some(Activation::Gelu),
            _ => None,
        }
    }
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + math::erf(x * core::f64::consts::FRAC_1_SQRT_2))
}

pub(crate) fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * math::exp(-0.5 * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        for a in [Activation::Identity, Activation::Relu, Activation::Gelu] {
            assert_eq!(a.apply(0.0), 0.0);
        }
    }

    #[test]
    fn gelu_slope_is_within_its_lipschitz_constant() {
        let mut worst: f64 = 0.0;
        for i in -4000..4000 {
            let x = i as f64 * 1e-3;
            worst = worst.max(Activation::Gelu.derivative(x).abs());
        }
        assert!(worst <= 1.13 && worst > 1.12, "{worst}");
    }
}
