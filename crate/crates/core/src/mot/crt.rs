//! Correlated Brownian boundary-length processes and the inverse-gamma law.

use crate::error::{invalid, Result};
use crate::params::LqgParams;
use crate::rng::{derive_seed, rng_from, LabRng};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Default censoring horizon of the stopped process, in units of ell0^2.
pub const GUARD_FACTOR: f64 = 1e3;

/// (X, Y) on an increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrtPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub params: LqgParams,
}

impl CrtPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// (dx, dy) increments between consecutive grid times.
    pub fn increments(&self) -> Vec<(f64, f64)> {
        (1..self.len()).map(|i| (self.x[i] - self.x[i - 1], self.y[i] - self.y[i - 1])).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,X,Y\n");
        for i in 0..self.len() {
            let _ = writeln!(s, "{},{},{}", self.times[i], self.x[i], self.y[i]);
        }
        s
    }
}

#[inline]
fn correlated(params: &LqgParams, h: f64, rng: &mut LabRng) -> (f64, f64) {
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let s = (params.a_sq * h).sqrt();
    let c = params.corr;
    (s * z1, s * (c * z1 + (1.0 - c * c).sqrt() * z2))
}

/// Uniform-grid path on [0, t] with exact per-step covariance
/// a^2 h [[1, corr], [corr, 1]].
pub fn sample_crt(params: &LqgParams, t: f64, step: f64, seed: u64) -> Result<CrtPath> {
    if !(t > 0.0) || !(step > 0.0) || !t.is_finite() {
        return invalid(format!("CRT path needs T, step > 0, got {t}, {step}"));
    }
    let n = (t / step).round().max(1.0) as usize;
    let h = t / n as f64;
    let mut rng = rng_from(derive_seed(seed, 0));
    let (mut x, mut y) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
    x.push(0.0);
    y.push(0.0);
    for i in 0..n {
        let (dx, dy) = correlated(params, h, &mut rng);
        x.push(x[i] + dx);
        y.push(y[i] + dy);
    }
    Ok(CrtPath { times: (0..=n).map(|i| i as f64 * h).collect(), x, y, params: *params })
}

/// A CRT path stopped when ell0 + X + Y first reaches 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedCrt {
    pub path: CrtPath,
    pub ell0: f64,
    /// First-passage time, or the guard time when censored.
    pub tau: f64,
    pub censored: bool,
}

/// Crossing probabilities below this are treated as no crossing.
const CROSS_NEGLIGIBLE: f64 = 1e-12;

/// Stopped process. The sum S = X + Y and difference D = X - Y are
/// independent Brownian motions; S is advanced with steps adapted to the
/// distance ell0 + S from 0, and a step is bisected with Brownian-bridge
/// midpoints while a crossing inside it is not negligible, down to `step`,
/// where the crossing is placed by linear interpolation. The returned path
/// lives on the visited (non-uniform) times, ending at tau with
/// ell0 + X + Y = 0.
pub fn stopped_crt_disk(params: &LqgParams, ell0: f64, step: f64, seed: u64, t_guard: f64) -> Result<StoppedCrt> {
    if !(ell0 > 0.0) || !(step > 0.0) || !(t_guard > 0.0) {
        return invalid(format!("stopped CRT needs ell0, step, T_guard > 0, got {ell0}, {step}, {t_guard}"));
    }
    let var_s = params.sum_variance();
    let var_d = params.diff_variance();
    let mut rng = rng_from(derive_seed(seed, 0));
    let mut times = vec![0.0];
    let mut level = vec![ell0];
    let mut t = 0.0;
    let mut tau = None;
    while t < t_guard {
        let l = *level.last().expect("nonempty");
        let h = ((l * l) / (4.0 * var_s)).max(step).min(t_guard - t);
        let next = l + (var_s * h).sqrt() * rng.sample::<f64, _>(StandardNormal);
        if let Some(hit) = locate(t, l, h, next, var_s, step, &mut rng, &mut times, &mut level) {
            tau = Some(hit);
            break;
        }
        t += h;
        times.push(t);
        level.push(next);
    }
    let censored = tau.is_none();
    if let Some(hit) = tau {
        times.push(hit);
        level.push(0.0);
    }
    // difference process on the same times
    let mut drng = rng_from(derive_seed(seed, 1));
    let mut d = Vec::with_capacity(times.len());
    d.push(0.0);
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        d.push(d[i - 1] + (var_d * h).sqrt() * drng.sample::<f64, _>(StandardNormal));
    }
    let x: Vec<f64> = level.iter().zip(&d).map(|(l, d)| 0.5 * ((l - ell0) + d)).collect();
    let y: Vec<f64> = level.iter().zip(&d).map(|(l, d)| 0.5 * ((l - ell0) - d)).collect();
    let tau = if censored { t_guard } else { *times.last().expect("nonempty") };
    Ok(StoppedCrt { path: CrtPath { times, x, y, params: *params }, ell0, tau, censored })
}

/// First crossing of 0 on [t, t + h] for a Brownian path of variance rate
/// `var` from `a` to `b`, refining with bridge midpoints. Visited interior
/// points before the crossing are appended to `times`/`level`.
#[allow(clippy::too_many_arguments)]
fn locate(t: f64, a: f64, h: f64, b: f64, var: f64, step: f64, rng: &mut LabRng, times: &mut Vec<f64>, level: &mut Vec<f64>) -> Option<f64> {
    let p = if b <= 0.0 { 1.0 } else { (-2.0 * a * b / (var * h)).exp() };
    if p < CROSS_NEGLIGIBLE {
        return None;
    }
    if h <= step {
        if b <= 0.0 {
            return Some(t + h * a / (a - b));
        }
        if rng.random::<f64>() < p {
            return Some(t + h * a / (a + b));
        }
        return None;
    }
    let mid = 0.5 * (a + b) + (0.25 * var * h).sqrt() * rng.sample::<f64, _>(StandardNormal);
    let half = 0.5 * h;
    if mid <= 0.0 {
        return Some(locate(t, a, half, mid, var, step, rng, times, level).unwrap_or_else(|| t + half * a / (a - mid)));
    }
    if let Some(hit) = locate(t, a, half, mid, var, step, rng, times, level) {
        return Some(hit);
    }
    times.push(t + half);
    level.push(mid);
    locate(t + half, mid, half, b, var, step, rng, times, level)
}

/// Inverse-gamma law with shape 1/2 and scale b: density
/// sqrt(b/(pi a^3)) e^{-b/a}, cdf erfc(sqrt(b/a)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGamma {
    pub b: f64,
}

impl InverseGamma {
    pub fn new(b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return invalid(format!("inverse-gamma scale must be positive, got {b}"));
        }
        Ok(InverseGamma { b })
    }

    /// Law of the first passage of ell0 + S to 0 when S has variance rate var.
    pub fn first_passage(ell0: f64, var: f64) -> Result<Self> {
        Self::new(ell0 * ell0 / (2.0 * var))
    }

    pub fn density(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        (self.b / (PI * a * a * a)).sqrt() * (-self.b / a).exp()
    }

    pub fn cdf(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        erfc((self.b / a).sqrt())
    }

    /// 2b / Z^2.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        2.0 * self.b / (z * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{cov_estimate, ks_one_sample};
    use approx::assert_relative_eq;

    fn p16() -> LqgParams {
        LqgParams::from_kappa(16.0).unwrap()
    }

    #[test]
    fn crt_starts_at_origin_and_has_covariance() {
        let p = p16();
        let path = sample_crt(&p, 200.0, 0.01, 1).unwrap();
        assert_eq!((path.x[0], path.y[0]), (0.0, 0.0));
        let est = cov_estimate(&path.increments(), 0.01).unwrap();
        assert!((est.var_x / p.a_sq - 1.0).abs() < 0.05);
        assert!((est.corr - p.corr).abs() < 0.03);
        assert!(path.to_csv().starts_with("t,X,Y\n0,0,0\n"));
    }

    #[test]
    fn stopped_path_ends_on_zero() {
        let p = p16();
        for seed in 0..50 {
            let s = stopped_crt_disk(&p, 1.0, 1e-6, seed, 1e3).unwrap();
            let n = s.path.len() - 1;
            if !s.censored {
                assert!((1.0 + s.path.x[n] + s.path.y[n]).abs() < 1e-12);
                assert_eq!(s.path.times[n], s.tau);
            }
            assert!(s.path.times.windows(2).all(|w| w[1] > w[0]));
            for i in 0..n {
                assert!(1.0 + s.path.x[i] + s.path.y[i] > 0.0);
            }
        }
    }

    #[test]
    fn first_passage_law() {
        let p = p16();
        let ig = InverseGamma::first_passage(1.0, p.sum_variance()).unwrap();
        let taus: Vec<f64> = (0..4000).map(|s| stopped_crt_disk(&p, 1.0, 1e-7, s, 1e3).unwrap().tau).collect();
        let r = ks_one_sample("tau", &taus, |a| ig.cdf(a), 0.01).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn inverse_gamma_examples() {
        let ig = InverseGamma::new(0.3).unwrap();
        assert_relative_eq!(ig.cdf(0.3), 0.157_299_207_050_285_1, epsilon = 1e-10);
        assert_eq!(ig.density(-1.0), 0.0);
        assert_eq!(ig.cdf(0.0), 0.0);
        // normalization by substitution a = 1/u^2 on a fine midpoint grid
        let n = 200_000;
        let mut s = 0.0;
        for i in 0..n {
            let u = 20.0 * (i as f64 + 0.5) / n as f64;
            s += ig.density(1.0 / (u * u)) * 2.0 / (u * u * u) * 20.0 / n as f64;
        }
        assert!((s - 1.0).abs() < 1e-6, "{s}");
        let mut rng = rng_from(8);
        let xs: Vec<f64> = (0..20_000).map(|_| ig.sample(&mut rng)).collect();
        assert!(ks_one_sample("ig", &xs, |a| ig.cdf(a), 0.01).unwrap().passed());
        assert!(InverseGamma::new(0.0).is_err());
    }

    #[test]
    fn area_scale_is_cot_over_eight() {
        let p = LqgParams::from_gamma(1.0).unwrap();
        assert_relative_eq!(p.first_passage_scale(), 1.0 / (8.0 * (PI / 8.0).tan()), epsilon = 1e-12);
    }
}
