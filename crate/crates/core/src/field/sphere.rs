//! Sphere fields on the cylinder R x [0, 2 pi): radial part plus lateral part.

use super::grid::{GridSpec, Layout};
use super::sample::FieldSample;
use crate::error::{invalid, Error, Result};
use crate::gmc;
use crate::params::LqgParams;
use crate::rng::{derive_seed, rng_from, LabRng};
use crate::C64;
use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use rustfft::FftPlanner;
use std::f64::consts::TAU;
use std::sync::Arc;

/// The radial part must end below this many multiples of -1/gamma at both
/// ends of the cylinder (area contribution beyond the horizon < 1%).
pub const END_LEVEL: f64 = 4.605_170_185_988_091;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Brownian motion with drift -mu conditioned to stay negative, started at
/// 0, at times k*dt for k = 0..n. Uses -(2M - W) with W a BM with drift -mu
/// and M its running maximum, the maximum over each step drawn exactly from
/// the Brownian-bridge law.
pub fn conditioned_drifted_bm(mu: f64, dt: f64, n: usize, rng: &mut LabRng) -> Result<Vec<f64>> {
    conditioned_drifted_bm_steps(mu, &vec![dt; n], rng)
}

/// As `conditioned_drifted_bm` on an arbitrary sequence of step sizes.
pub fn conditioned_drifted_bm_steps(mu: f64, steps: &[f64], rng: &mut LabRng) -> Result<Vec<f64>> {
    if !(mu > 0.0) || steps.iter().any(|&h| !(h > 0.0)) {
        return invalid(format!("conditioned BM needs positive drift and steps, got mu = {mu}"));
    }
    let mut out = Vec::with_capacity(steps.len() + 1);
    out.push(0.0);
    let (mut w, mut m) = (0.0f64, 0.0f64);
    for &dt in steps {
        let z: f64 = rng.sample(StandardNormal);
        let next = w - mu * dt + dt.sqrt() * z;
        let u: f64 = 1.0 - rng.random::<f64>();
        let bridge_max = 0.5 * (w + next + ((next - w).powi(2) - 2.0 * dt * u.ln()).sqrt());
        m = m.max(bridge_max);
        w = next;
        out.push(-(2.0 * m - w));
    }
    Ok(out)
}

/// Sphere field with insertion alpha at both ends of the cylinder grid
/// (constant 0, weight 1). The radial part goes in `smooth`, the lateral
/// part in `gaussian`.
pub fn sample_sphere_field(params: &LqgParams, alpha: f64, grid: Arc<GridSpec>, seed: u64) -> Result<FieldSample> {
    let Layout::Cylinder { ns, angles, horizon } = grid.layout else {
        return invalid("sphere fields live on a cylinder grid");
    };
    if alpha >= params.q {
        return Err(Error::Seiberg { alpha, q: params.q });
    }
    if ns % 2 != 0 {
        return invalid("sphere fields need an even number of cylinder rows");
    }
    let ds = 2.0 * horizon / ns as f64;
    let modes = (-EULER_GAMMA).exp() / grid.eps;
    let modes = modes.round() as usize;
    if modes == 0 || modes > angles / 2 {
        return Err(Error::UnrepresentableEps(grid.eps));
    }
    // radial: node rows sit at s = -H + (k + 1/2) ds, symmetric about 0
    let half = ns / 2;
    let mu = params.q - alpha;
    let mut rng = rng_from(derive_seed(seed, 0));
    let mut radial = vec![0.0; ns];
    let mut steps = vec![ds; ns - half];
    steps[0] = 0.5 * ds;
    for side in 0..2 {
        // first row is half a step from 0, then full steps
        let path = conditioned_drifted_bm_steps(mu, &steps, &mut rng)?;
        for (j, &x) in path.iter().skip(1).enumerate() {
            let k = if side == 0 { half + j } else { half - 1 - j };
            if k < ns {
                radial[k] = x;
            }
        }
    }
    let end = radial[0].max(radial[ns - 1]);
    if end > -END_LEVEL / params.gamma {
        return Err(Error::Diagnostic(format!("radial part {end:.3} at the cylinder ends; horizon {horizon} too short")));
    }
    // lateral: mode n is an OU process in s with covariance e^{-n|s-s'|}/n
    let mut lrng = rng_from(derive_seed(seed, 1));
    let mut coef = vec![C64::new(0.0, 0.0); modes];
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(angles);
    let mut gaussian = Vec::with_capacity(grid.len());
    let mut smooth = Vec::with_capacity(grid.len());
    for k in 0..ns {
        for (j, c) in coef.iter_mut().enumerate() {
            let n = (j + 1) as f64;
            let var = 1.0 / n;
            let (a, b): (f64, f64) = (lrng.sample(StandardNormal), lrng.sample(StandardNormal));
            if k == 0 {
                *c = C64::new(a, b) * var.sqrt();
            } else {
                let rho = (-n * ds).exp();
                *c = *c * rho + C64::new(a, b) * (var * (1.0 - rho * rho)).sqrt();
            }
        }
        // value(theta) = sum_n a_n cos(n theta) + b_n sin(n theta) = Re sum_n (a_n - i b_n) e^{i n theta}
        let mut row = vec![C64::new(0.0, 0.0); angles];
        for (j, c) in coef.iter().enumerate() {
            row[j + 1] = c.conj();
        }
        ifft.process(&mut row);
        gaussian.extend(row.iter().map(|v| v.re));
        smooth.extend(std::iter::repeat_n(radial[k], angles));
    }
    Ok(FieldSample { gaussian, smooth, seed, ..FieldSample::zero(grid) })
}

/// Condition on total area >= 1 by integrating out the zero mode with
/// density (gamma/2) e^{2(alpha-Q)c}: c = c0 + Exp(2(Q - alpha)) with
/// c0 = -(1/gamma) log A, weight multiplied by
/// (gamma / (4(Q - alpha))) A^{2(Q-alpha)/gamma}.
pub fn condition_on_area(field: &FieldSample, params: &LqgParams, alpha: f64, seed: u64) -> Result<FieldSample> {
    if alpha >= params.q {
        return Err(Error::Seiberg { alpha, q: params.q });
    }
    let base = FieldSample { constant: 0.0, ..field.clone() };
    let area = gmc::area_measure(&base, params.gamma)?.total();
    if !(area > 0.0) || !area.is_finite() {
        return Err(Error::NonFinite("sphere area"));
    }
    let (c0, extra, factor) = area_conditioned_constant(params, alpha, area, seed)?;
    Ok(FieldSample { constant: c0 + extra, weight: field.weight * factor, ..base })
}

/// (c0, c - c0, weight factor) for a field of unit-constant area `area`.
pub fn area_conditioned_constant(params: &LqgParams, alpha: f64, area: f64, seed: u64) -> Result<(f64, f64, f64)> {
    let mu = params.q - alpha;
    if !(mu > 0.0) {
        return Err(Error::Seiberg { alpha, q: params.q });
    }
    let g = params.gamma;
    let c0 = -area.ln() / g;
    let mut rng = rng_from(derive_seed(seed, 2));
    let extra = rng.sample(Exp::new(2.0 * mu).map_err(|e| Error::InvalidParameter(e.to_string()))?);
    let factor = g / (4.0 * mu) * area.powf(2.0 * mu / g);
    Ok((c0, extra, factor))
}

/// Node spacing and step used by `sample_sphere_field` for a horizon.
pub fn sphere_grid(horizon: f64, angles: usize, eps: f64) -> Result<GridSpec> {
    let ns = 2 * ((horizon / (TAU / angles as f64)).ceil() as usize).max(1);
    GridSpec::cylinder(ns, angles, horizon, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_one_sample;

    #[test]
    fn conditioned_path_is_negative() {
        let mut rng = rng_from(5);
        for _ in 0..200 {
            let p = conditioned_drifted_bm(0.25, 0.05, 400, &mut rng).unwrap();
            assert_eq!(p[0], 0.0);
            assert!(p[1..].iter().all(|&x| x < 0.0));
        }
    }

    #[test]
    fn conditioned_path_drift() {
        // E X_t ~ -mu t for large t
        let mut rng = rng_from(6);
        let (mu, t, n) = (0.5, 40.0, 2000);
        let mean: f64 = (0..n).map(|_| *conditioned_drifted_bm(mu, t / 400.0, 400, &mut rng).unwrap().last().unwrap()).sum::<f64>() / n as f64;
        // E (2M - W)_t = mu t + (1/mu)(1 - ...) -> mu t + 1/mu for large t
        assert!((mean + mu * t + 1.0 / mu).abs() < 0.6, "{mean}");
    }

    #[test]
    fn sphere_field_structure() {
        let p = LqgParams::from_gamma(1.0).unwrap();
        let grid = Arc::new(sphere_grid(120.0, 32, 0.1).unwrap());
        let alpha = p.q - 0.25;
        let mut ok = 0;
        for seed in 0..20 {
            match sample_sphere_field(&p, alpha, grid.clone(), seed) {
                Ok(f) => {
                    ok += 1;
                    assert!(f.smooth.iter().all(|&x| x < 0.0));
                    // lateral part averages to zero on each circle
                    for row in f.gaussian.chunks(32) {
                        assert!(row.iter().sum::<f64>().abs() < 1e-9);
                    }
                    let c = condition_on_area(&f, &p, alpha, seed).unwrap();
                    let a = gmc::area_measure(&c, 1.0).unwrap().total();
                    assert!(a >= 1.0 - 1e-9);
                }
                Err(Error::Diagnostic(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(ok >= 15);
        assert!(sample_sphere_field(&p, p.q, grid, 0).is_err());
    }

    #[test]
    fn excess_constant_is_exponential() {
        let p = LqgParams::from_gamma(1.0).unwrap();
        let alpha = p.q - 0.25;
        let xs: Vec<f64> = (0..10_000).map(|s| area_conditioned_constant(&p, alpha, 3.0, s).unwrap().1).collect();
        let r = ks_one_sample("c-c0", &xs, |x| 1.0 - (-0.5 * x).exp(), 0.01).unwrap();
        assert!(r.passed(), "{r:?}");
        let (c0, _, w) = area_conditioned_constant(&p, alpha, 4.0, 0).unwrap();
        assert!((c0 + 4f64.ln()).abs() < 1e-15);
        assert!((w - 2.0).abs() < 1e-12);
    }
}
