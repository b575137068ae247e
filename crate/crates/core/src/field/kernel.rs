//! Green functions and their eps-regularized circle-average versions.

use crate::error::{Error, Result};
use crate::C64;
use std::sync::OnceLock;

/// G_D(z, w) = -log|z - w| - log|1 - z conj(w)|.
pub fn green_disk(z: C64, w: C64) -> Result<f64> {
    let d = (z - w).norm();
    if d == 0.0 {
        return Err(Error::Singular);
    }
    Ok(-d.ln() - (1.0 - z * w.conj()).norm().ln())
}

/// A point of the closed upper half-plane or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HPoint {
    Finite(C64),
    Infinity,
}

#[inline]
fn log_plus(z: C64) -> f64 {
    z.norm().max(1.0).ln()
}

/// G_H(z, w) = -log|z-w| - log|z-conj w| + 2 log|z|_+ + 2 log|w|_+, and
/// G_H(z, inf) = 2 log|z|_+.
pub fn green_halfplane(z: HPoint, w: HPoint) -> Result<f64> {
    match (z, w) {
        (HPoint::Infinity, HPoint::Infinity) => Err(Error::Singular),
        (HPoint::Finite(z), HPoint::Infinity) | (HPoint::Infinity, HPoint::Finite(z)) => Ok(2.0 * log_plus(z)),
        (HPoint::Finite(z), HPoint::Finite(w)) => {
            let d = (z - w).norm();
            if d == 0.0 {
                return Err(Error::Singular);
            }
            Ok(-d.ln() - (z - w.conj()).norm().ln() + 2.0 * log_plus(z) + 2.0 * log_plus(w))
        }
    }
}

const TABLE_N: usize = 4096;

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton on Legendre polynomials
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-15 {
                let (mut p0, mut p1) = (1.0, t);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
                w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
                break;
            }
        }
        x[i] = t;
    }
    (x, w)
}

/// (1/pi) int_0^{phi*} (1/2) log(1 + u^2 + 2u cos phi) dphi, phi* = arccos(-u/2).
fn excess(u: f64, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let top = (-u / 2.0).clamp(-1.0, 1.0).acos();
    let mut s = 0.0;
    for (x, w) in nodes.0.iter().zip(&nodes.1) {
        let phi = 0.5 * top * (x + 1.0);
        s += w * 0.5 * (1.0 + u * u + 2.0 * u * phi.cos()).max(1e-300).ln();
    }
    s * 0.5 * top / std::f64::consts::PI
}

fn table() -> &'static Vec<f64> {
    static T: OnceLock<Vec<f64>> = OnceLock::new();
    T.get_or_init(|| {
        let nodes = gauss_legendre(96);
        (0..=TABLE_N).map(|i| excess(2.0 * i as f64 / TABLE_N as f64, &nodes)).collect()
    })
}

/// Double circle average of -log|x - y| over circles of radius eps about
/// two centers at distance d. Equals -log d for d >= 2 eps and -log eps at 0.
pub fn double_circle_log(d: f64, eps: f64) -> f64 {
    let u = d / eps;
    if u >= 2.0 {
        return -d.ln();
    }
    let t = table();
    let x = u * TABLE_N as f64 / 2.0;
    let i = (x.floor() as usize).min(TABLE_N - 1);
    let f = x - i as f64;
    -eps.ln() - ((1.0 - f) * t[i] + f * t[i + 1])
}

/// Regularized disk covariance D(|z-w|) + D(|1 - z conj w|); equals G_D
/// whenever |z - w| >= 2 eps.
#[inline]
pub fn disk_kernel(z: C64, w: C64, eps: f64) -> f64 {
    double_circle_log((z - w).norm(), eps) + double_circle_log((1.0 - z * w.conj()).norm(), eps)
}

/// Regularized half-plane covariance.
#[inline]
pub fn halfplane_kernel(z: C64, w: C64, eps: f64) -> f64 {
    double_circle_log((z - w).norm(), eps) + double_circle_log((z - w.conj()).norm(), eps)
        + 2.0 * log_plus(z)
        + 2.0 * log_plus(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn green_disk_examples() {
        let w = C64::new(0.3, -0.2);
        assert_relative_eq!(green_disk(C64::new(0.0, 0.0), w).unwrap(), -w.norm().ln(), epsilon = 1e-15);
        assert_relative_eq!(green_disk(C64::new(0.0, 0.0), C64::new(0.5, 0.0)).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert!(green_disk(w, w).is_err());
    }

    #[test]
    fn green_halfplane_examples() {
        let i = C64::i();
        assert_eq!(green_halfplane(HPoint::Finite(i), HPoint::Infinity).unwrap(), 0.0);
        assert_relative_eq!(
            green_halfplane(HPoint::Finite(i), HPoint::Finite(2.0 * i)).unwrap(),
            (4.0f64 / 3.0).ln(),
            epsilon = 1e-15
        );
        assert_relative_eq!(green_halfplane(HPoint::Finite(2.0 * i), HPoint::Infinity).unwrap(), 2.0 * 2f64.ln());
        assert!(green_halfplane(HPoint::Finite(i), HPoint::Finite(i)).is_err());
    }

    #[test]
    fn double_circle_limits() {
        let eps = 0.01;
        assert_relative_eq!(double_circle_log(0.0, eps), -eps.ln(), epsilon = 1e-12);
        assert_relative_eq!(double_circle_log(2.0 * eps, eps), -(2.0 * eps).ln(), epsilon = 1e-7);
        assert_relative_eq!(double_circle_log(0.5, eps), -(0.5f64).ln());
    }

    #[test]
    fn double_circle_against_brute_force() {
        // direct double average on a fine angular grid
        let eps = 1.0;
        for &d in &[0.3, 0.9, 1.5] {
            let n = 1500;
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let x = C64::from_polar(eps, std::f64::consts::TAU * (a as f64 + 0.5) / n as f64);
                    let y = C64::new(d, 0.0) + C64::from_polar(eps, std::f64::consts::TAU * b as f64 / n as f64);
                    s -= (x - y).norm().ln();
                }
            }
            let brute = s / (n * n) as f64;
            assert_relative_eq!(double_circle_log(d, eps), brute, epsilon = 2e-3);
        }
    }

    #[test]
    fn disk_kernel_matches_green_when_separated() {
        let eps = 0.01;
        let z = C64::new(0.5, 0.1);
        let w = C64::new(0.2, -0.4);
        assert_relative_eq!(disk_kernel(z, w, eps), green_disk(z, w).unwrap(), epsilon = 1e-12);
        // boundary diagonal is -2 log eps
        let x = C64::from_polar(1.0, 0.3);
        assert_relative_eq!(disk_kernel(x, x, eps), -2.0 * eps.ln(), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn green_disk_symmetric(a in 0.0f64..0.99, b in 0.0f64..0.99, t in 0.0f64..6.28, s in 0.0f64..6.28) {
            let z = C64::from_polar(a, t);
            let w = C64::from_polar(b, s);
            prop_assume!((z - w).norm() > 1e-9);
            let g1 = green_disk(z, w).unwrap();
            let g2 = green_disk(w, z).unwrap();
            prop_assert!((g1 - g2).abs() < 1e-12);
        }

        #[test]
        fn double_circle_monotone(u in 0.0f64..3.9) {
            let eps = 0.05;
            prop_assert!(double_circle_log(u * eps, eps) >= double_circle_log((u + 0.05) * eps, eps) - 1e-9);
        }
    }
}
