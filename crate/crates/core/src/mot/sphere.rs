//! Brownian excursion and Z process of the sphere, via the small-start
//! first-passage construction.

use crate::error::{invalid, Error, Result};
use crate::params::LqgParams;
use crate::rng::{derive_seed, rng_from, LabRng};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erf_inv};
use std::fmt::Write as _;

/// Start level of the first-passage process approximating the excursion.
pub const ELL_MIN: f64 = 1e-3;
/// Cap on the number of steps of one path; longer excursions use a coarser step.
pub const MAX_STEPS: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePair {
    pub times: Vec<f64>,
    pub l: Vec<f64>,
    pub z: Vec<f64>,
    pub tau: f64,
    /// Start level of the construction: l[0] = ell_min.
    pub ell_min: f64,
}

impl SpherePair {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,L,Z\n");
        for i in 0..self.times.len() {
            let _ = writeln!(s, "{},{},{}", self.times[i], self.l[i], self.z[i]);
        }
        s
    }

    /// Sums of squared increments (Z, L).
    pub fn quadratic_variations(&self) -> (f64, f64) {
        let mut qz = 0.0;
        let mut ql = 0.0;
        for i in 1..self.times.len() {
            qz += (self.z[i] - self.z[i - 1]).powi(2);
            ql += (self.l[i] - self.l[i - 1]).powi(2);
        }
        (qz, ql)
    }
}

/// First-passage time of ell + S to 0 (S of variance rate var) conditioned
/// on being at least 1, from a uniform v in (0, 1]: inverts
/// P[tau >= t | tau >= 1] = erf(sqrt(b/t)) / erf(sqrt(b)), b = ell^2 / (2 var).
pub fn conditioned_passage_time(ell: f64, var: f64, v: f64) -> Result<f64> {
    if !(ell > 0.0) || !(var > 0.0) || !(v > 0.0 && v <= 1.0) {
        return invalid(format!("conditioned passage needs ell, var > 0 and v in (0, 1], got {ell}, {var}, {v}"));
    }
    let b = ell * ell / (2.0 * var);
    let x = erf_inv(v * erf(b.sqrt()));
    let t = b / (x * x);
    if !t.is_finite() || x <= 0.0 {
        return Err(Error::RejectionBudget(1));
    }
    Ok(t.max(1.0))
}

/// Given tau, the first-passage path from ell is ell_s = sigma |beta_{tau - s}|
/// for a three-dimensional Brownian bridge beta from 0 to (ell/sigma, 0, 0)
/// over [0, tau]. Returns the level at forward time s.
fn bessel_bridge_at(ell: f64, sigma: f64, tau: f64, s: f64, n: [f64; 3]) -> f64 {
    let r = tau - s;
    let mean = (ell / sigma) * r / tau;
    let sd = (r * s / tau).sqrt();
    sigma * ((mean + sd * n[0]).powi(2) + (sd * n[1]).powi(2) + (sd * n[2]).powi(2)).sqrt()
}

fn draw(rng: &mut LabRng) -> (f64, [f64; 3]) {
    let v = 1.0 - rng.random::<f64>();
    let n = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
    (v, n)
}

/// Values at time t of the first-passage process from `ell`, conditioned on
/// duration >= 1, for n independent draws. Draw i uses the same random
/// numbers for every `ell`, so samples at different start levels are coupled.
pub fn conditioned_passage_marginal(params: &LqgParams, ell: f64, t: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(t > 0.0 && t < 1.0) {
        return invalid(format!("marginal time must lie in (0, 1), got {t}"));
    }
    let var = params.sum_variance();
    let sigma = var.sqrt();
    (0..n)
        .map(|i| {
            let (v, z) = draw(&mut rng_from(derive_seed(seed, i as u64)));
            let tau = conditioned_passage_time(ell, var, v)?;
            Ok(bessel_bridge_at(ell, sigma, tau, t, z))
        })
        .collect()
}

/// One (L, Z) pair: L is the first-passage process started at ELL_MIN with
/// variance rate 2 a^2 (1 + corr) conditioned on duration >= 1, and Z an
/// independent Brownian motion of rate 2 a^2 (1 - corr) run for the duration.
pub fn sample_sphere_pair(params: &LqgParams, step: f64, seed: u64) -> Result<SpherePair> {
    if !(step > 0.0) || !step.is_finite() {
        return invalid(format!("step must be positive, got {step}"));
    }
    let var = params.sum_variance();
    let sigma = var.sqrt();
    let mut rng = rng_from(derive_seed(seed, 0));
    let (v, _) = draw(&mut rng);
    let tau = conditioned_passage_time(ELL_MIN, var, v)?;
    let n = ((tau / step).ceil() as usize).clamp(1, MAX_STEPS);
    let h = tau / n as f64;
    // bridge in reversed time r = tau - t, from 0 at r = 0 to e at r = tau
    let e = ELL_MIN / sigma;
    let mut beta = vec![[0.0f64; 3]; n + 1];
    for j in 0..n {
        let r = j as f64 * h;
        let left = tau - r;
        for c in 0..3 {
            let target = if c == 0 { e } else { 0.0 };
            let x = beta[j][c];
            let mean = x + (target - x) * h / left;
            let sd = (h * (left - h) / left).max(0.0).sqrt();
            beta[j + 1][c] = mean + sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    times[n] = tau;
    let mut l: Vec<f64> = (0..=n).map(|i| sigma * norm3(beta[n - i])).collect();
    l[0] = ELL_MIN;
    l[n] = 0.0;
    let zsd = (params.diff_variance() * h).sqrt();
    let mut zrng = rng_from(derive_seed(seed, 1));
    let mut z = Vec::with_capacity(n + 1);
    z.push(0.0);
    for i in 0..n {
        z.push(z[i] + zsd * zrng.sample::<f64, _>(StandardNormal));
    }
    Ok(SpherePair { times, l, z, tau, ell_min: ELL_MIN })
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Pooled quadratic-variation ratio sum (dZ)^2 / sum (dL)^2.
pub fn qv_ratio(pairs: &[SpherePair]) -> f64 {
    let (qz, ql) = pairs.iter().map(|p| p.quadratic_variations()).fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    qz / ql
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_distance, ks_one_sample};
    use std::f64::consts::PI;

    fn g1() -> LqgParams {
        LqgParams::from_gamma(1.0).unwrap()
    }

    #[test]
    fn pair_shape() {
        let p = g1();
        for seed in 0..20 {
            let s = sample_sphere_pair(&p, 1e-3, seed).unwrap();
            assert!(s.tau >= 1.0);
            assert_eq!(*s.times.last().unwrap(), s.tau);
            assert_eq!(s.l[0], ELL_MIN);
            assert_eq!(*s.l.last().unwrap(), 0.0);
            assert!(s.l[..s.l.len() - 1].iter().all(|&x| x > 0.0));
            assert_eq!(s.z[0], 0.0);
        }
        assert!(s_csv().starts_with("t,L,Z\n0,0.001,0\n"));
    }

    fn s_csv() -> String {
        sample_sphere_pair(&g1(), 1e-2, 3).unwrap().to_csv()
    }

    #[test]
    fn qv_ratio_is_cot_squared() {
        let p = g1();
        let pairs: Vec<SpherePair> = (0..300).map(|s| sample_sphere_pair(&p, 1e-3, s).unwrap()).collect();
        let want = (1.0 / (PI / 8.0).tan()).powi(2);
        assert!((qv_ratio(&pairs) / want - 1.0).abs() < 0.05, "{}", qv_ratio(&pairs));
    }

    #[test]
    fn conditioned_time_law() {
        // P[tau <= t | tau >= 1] for the unconditioned inverse-gamma law
        let (ell, var) = (0.3, 2.0);
        let b = ell * ell / (2.0 * var);
        let mut rng = rng_from(4);
        let xs: Vec<f64> = (0..20_000).map(|_| conditioned_passage_time(ell, var, 1.0 - rng.random::<f64>()).unwrap()).collect();
        let cdf = |t: f64| if t < 1.0 { 0.0 } else { 1.0 - erf((b / t).sqrt()) / erf(b.sqrt()) };
        assert!(ks_one_sample("cond", &xs, cdf, 0.01).unwrap().passed());
    }

    #[test]
    fn marginal_converges_in_ell() {
        let p = g1();
        let base = conditioned_passage_marginal(&p, ELL_MIN, 0.5, 4000, 9).unwrap();
        let d1 = ks_distance(&conditioned_passage_marginal(&p, 0.05, 0.5, 4000, 9).unwrap(), &base).unwrap();
        let d2 = ks_distance(&conditioned_passage_marginal(&p, 0.025, 0.5, 4000, 9).unwrap(), &base).unwrap();
        assert!(d2 < d1 && d2 < 0.03, "{d1} {d2}");
    }

    #[test]
    fn marginal_matches_path_sampler() {
        // the path sampler's L at t = 0.5 has the same law as the exact marginal
        let p = g1();
        let path: Vec<f64> = (0..1500)
            .map(|s| {
                let pr = sample_sphere_pair(&p, 1e-2, 1000 + s).unwrap();
                let i = pr.times.iter().position(|&t| t >= 0.5).unwrap();
                pr.l[i]
            })
            .collect();
        let exact = conditioned_passage_marginal(&p, ELL_MIN, 0.5, 1500, 77).unwrap();
        let r = crate::stats::ks_two_sample("m", &path, &exact, 0.01).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}
