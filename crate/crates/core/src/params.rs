//! Coupled LQG / SLE parameters.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Parameters derived from a single gamma in (0, 2), with kappa = 16/gamma^2 > 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqgParams {
    pub gamma: f64,
    pub kappa: f64,
    pub q: f64,
    /// Brownian variance scale of the mating-of-trees pair.
    pub a_sq: f64,
    pub corr: f64,
}

impl LqgParams {
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0 && gamma < 2.0) {
            return invalid(format!("gamma must lie in (0,2), got {gamma}"));
        }
        let kappa = 16.0 / (gamma * gamma);
        let s = (4.0 * PI / kappa).sin();
        Ok(Self {
            gamma,
            kappa,
            q: 2.0 / gamma + gamma / 2.0,
            a_sq: 2.0 / s,
            corr: -(4.0 * PI / kappa).cos(),
        })
    }

    pub fn from_kappa(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 4.0) {
            return invalid(format!("kappa must exceed 4, got {kappa}"));
        }
        let mut p = Self::from_gamma(4.0 / kappa.sqrt())?;
        p.kappa = kappa;
        Ok(p)
    }

    /// Scaling exponent alpha/2 (Q - alpha/2).
    pub fn delta(&self, alpha: f64) -> f64 {
        0.5 * alpha * (self.q - 0.5 * alpha)
    }

    /// Angle theta = pi gamma^2 / 8 = 2 pi / kappa.
    pub fn theta(&self) -> f64 {
        PI * self.gamma * self.gamma / 8.0
    }

    /// Variance per unit time of X + Y.
    pub fn sum_variance(&self) -> f64 {
        2.0 * self.a_sq * (1.0 + self.corr)
    }

    /// Variance per unit time of X - Y.
    pub fn diff_variance(&self) -> f64 {
        2.0 * self.a_sq * (1.0 - self.corr)
    }

    /// Scale b of the inverse-gamma(1/2, b ell^2) law of the disk area.
    pub fn first_passage_scale(&self) -> f64 {
        0.5 / self.sum_variance()
    }

    /// The radial-MOT weight exponent at kappa' for insertions alpha, beta.
    pub fn lf_exponent(&self, alpha: f64, beta: f64) -> f64 {
        (2.0 * alpha + beta - 2.0 * self.q) / self.gamma
    }

    pub fn check_seiberg(&self, alpha: f64) -> Result<()> {
        if alpha >= self.q {
            return Err(crate::Error::Seiberg { alpha, q: self.q });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gamma_one() {
        let p = LqgParams::from_gamma(1.0).unwrap();
        assert_relative_eq!(p.kappa, 16.0);
        assert_relative_eq!(p.q, 2.5);
        assert_relative_eq!(p.a_sq, 2.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(p.corr, -(0.5f64).sqrt(), epsilon = 1e-12);
        // 1/(2 * 4 tan(pi/8))
        assert_relative_eq!(p.first_passage_scale(), 0.301_776_695_296_636_9, epsilon = 1e-12);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(LqgParams::from_gamma(2.0).is_err());
        assert!(LqgParams::from_gamma(0.0).is_err());
        assert!(LqgParams::from_kappa(4.0).is_err());
        assert!(LqgParams::from_kappa(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn kappa_round_trip(gamma in 0.05f64..1.99) {
            let p = LqgParams::from_gamma(gamma).unwrap();
            let r = LqgParams::from_kappa(p.kappa).unwrap();
            prop_assert!((r.gamma - gamma).abs() < 1e-12);
            prop_assert!(p.a_sq > 0.0);
            prop_assert!(p.corr.abs() < 1.0);
            // sum variance = 4 tan(theta)
            prop_assert!((p.sum_variance() - 4.0 * p.theta().tan()).abs() < 1e-9 * p.sum_variance().max(1.0));
        }

        #[test]
        fn delta_reflection(gamma in 0.05f64..1.99, alpha in -5.0f64..5.0) {
            let p = LqgParams::from_gamma(gamma).unwrap();
            let (a, b) = (p.delta(alpha), p.delta(2.0 * p.q - alpha));
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }
}
