use crate::error::{invalid, Result};
use crate::rng::{derive_seed, keyed_normal, rng_from};
use crate::C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrivingKind {
    /// `xi` is the unwrapped angle: U_k = exp(i xi_k).
    Radial,
    /// `xi` holds the real driving function W_k.
    Chordal,
}

/// Driving function sampled on a uniform grid t_k = t0 + k step.
///
/// Below the grid step the radial path is refined by Brownian bridges whose
/// midpoints are keyed by dyadic position, so every refinement of the same
/// seed describes the same Brownian path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingPath {
    pub t0: f64,
    pub step: f64,
    pub xi: Vec<f64>,
    pub kappa: f64,
    pub seed: u64,
    pub kind: DrivingKind,
    /// Number of times this path was obtained by halving the original step.
    pub level: u32,
}

const PHASE_STREAM: u64 = 0x5048;

fn grid_count(t: f64, step: f64) -> Result<(usize, f64)> {
    if !(step > 0.0 && step.is_finite()) {
        return invalid(format!("step must be positive, got {step}"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return invalid(format!("horizon must be non-negative, got {t}"));
    }
    let n = (t / step).round() as usize;
    if n == 0 {
        return Ok((0, step));
    }
    Ok((n, t / n as f64))
}

/// Radial driving U_t = exp(i sqrt(kappa) B_t) with U_0 = 1.
pub fn sample_radial_driving(kappa: f64, t: f64, step: f64, seed: u64) -> Result<DrivingPath> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return invalid(format!("kappa must be positive, got {kappa}"));
    }
    let (n, h) = grid_count(t, step)?;
    let mut rng = rng_from(seed);
    let sd = (kappa * h).sqrt();
    let mut xi = Vec::with_capacity(n + 1);
    xi.push(0.0);
    let mut x = 0.0;
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        x += sd * z;
        xi.push(x);
    }
    Ok(DrivingPath { t0: 0.0, step: h, xi, kappa, seed, kind: DrivingKind::Radial, level: 0 })
}

/// Two-sided radial driving on [-t_neg, t_pos] with xi(0) uniform on
/// [0, 2 pi), independent of the increments. Pinning xi(0) = 0 would fix
/// the orientation of the hull at time 0 and break rotation invariance.
pub fn sample_two_sided_driving(kappa: f64, t_neg: f64, t_pos: f64, step: f64, seed: u64) -> Result<DrivingPath> {
    let (n_neg, _) = grid_count(t_neg, step)?;
    let mut p = sample_radial_driving(kappa, t_neg + t_pos, step, seed)?;
    // keep the step exact for the combined horizon, then re-anchor at zero
    let k0 = ((t_neg / p.step).round() as usize).min(p.xi.len() - 1);
    let _ = n_neg;
    let phase = rng_from(derive_seed(seed, PHASE_STREAM)).random_range(0.0..TAU);
    let x0 = p.xi[k0] - phase;
    for v in &mut p.xi {
        *v -= x0;
    }
    p.t0 = -(k0 as f64) * p.step;
    Ok(p)
}

impl DrivingPath {
    /// Constant driving U = 1 on [0, t].
    pub fn constant(kappa: f64, t: f64, step: f64) -> Result<Self> {
        let (n, h) = grid_count(t, step)?;
        Ok(Self { t0: 0.0, step: h, xi: vec![0.0; n + 1], kappa, seed: 0, kind: DrivingKind::Radial, level: 0 })
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn value(&self, k: usize) -> C64 {
        C64::from_polar(1.0, self.xi[k])
    }

    pub fn values(&self) -> Vec<C64> {
        (0..self.len()).map(|k| self.value(k)).collect()
    }

    /// Grid index of time t, if t lies on the grid (to 1e-9 relative to the step).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.step;
        let k = x.round();
        if (x - k).abs() < 1e-6 && k >= 0.0 && (k as usize) < self.len() {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Nearest grid index at or below t (clamped to the grid).
    pub fn floor_index(&self, t: f64) -> usize {
        let x = ((t - self.t0) / self.step + 1e-9).floor();
        (x.max(0.0) as usize).min(self.len() - 1)
    }

    /// Midpoint of the bridge over sub-interval `idx` at `depth` inside step k,
    /// given its endpoint values and length h.
    pub(crate) fn bridge_mid(&self, k: usize, depth: u32, idx: u64, xa: f64, xb: f64, h: f64) -> f64 {
        // map to the coordinates of the unrefined path so refinements agree
        let r = self.level;
        let root_k = (k >> r) as u64;
        let within = (k as u64) & ((1u64 << r) - 1);
        let root_depth = depth + r + 1;
        let root_idx = (within << depth) + idx;
        let z = keyed_normal(self.seed, root_k, root_depth as u64, root_idx);
        0.5 * (xa + xb) + 0.5 * (self.kappa * h).sqrt() * z
    }

    /// The same Brownian path on the grid of half the step.
    pub fn refine(&self) -> DrivingPath {
        let mut xi = Vec::with_capacity(2 * self.xi.len());
        for k in 0..self.len().saturating_sub(1) {
            xi.push(self.xi[k]);
            let mid = match self.kind {
                DrivingKind::Radial => self.bridge_mid(k, 0, 0, self.xi[k], self.xi[k + 1], self.step),
                DrivingKind::Chordal => 0.5 * (self.xi[k] + self.xi[k + 1]),
            };
            xi.push(mid);
        }
        xi.push(*self.xi.last().unwrap());
        DrivingPath { xi, step: 0.5 * self.step, level: self.level + 1, ..self.clone() }
    }

    /// Increments of the path over 2^depth equal sub-steps of step k.
    pub(crate) fn sub_increments(&self, k: usize, depth: u32) -> Vec<f64> {
        let mut pts = vec![self.xi[k], self.xi[k + 1]];
        for d in 0..depth {
            let h = self.step / (1u64 << d) as f64;
            let mut next = Vec::with_capacity(2 * pts.len() - 1);
            for j in 0..pts.len() - 1 {
                next.push(pts[j]);
                next.push(self.bridge_mid(k, d, j as u64, pts[j], pts[j + 1], h));
            }
            next.push(*pts.last().unwrap());
            pts = next;
        }
        pts.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_horizon() {
        let p = sample_radial_driving(4.0, 0.0, 0.01, 3).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.value(0), C64::new(1.0, 0.0));
    }

    #[test]
    fn unimodular_and_deterministic() {
        let p = sample_radial_driving(10.0, 1.0, 1e-3, 9).unwrap();
        let q = sample_radial_driving(10.0, 1.0, 1e-3, 9).unwrap();
        assert_eq!(p, q);
        for u in p.values() {
            assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-14);
        }
        assert!(sample_radial_driving(10.0, 1.0, 0.0, 9).is_err());
    }

    #[test]
    fn increment_variance() {
        // 1e4 paths, T = 0.5: Var(xi_T) = kappa T
        let (kappa, t) = (10.0, 0.5);
        let n = 10_000;
        let ends: Vec<f64> = (0..n)
            .map(|i| *sample_radial_driving(kappa, t, 0.01, crate::rng::derive_seed(4, i)).unwrap().xi.last().unwrap())
            .collect();
        let v = crate::stats::variance(&ends);
        let se = kappa * t * (2.0 / n as f64).sqrt();
        assert!((v - kappa * t).abs() < 3.0 * se, "variance {v}");
    }

    #[test]
    fn refinement_is_consistent() {
        let p = sample_radial_driving(8.0, 0.1, 0.01, 5).unwrap();
        let r = p.refine();
        assert_eq!(r.len(), 2 * p.len() - 1);
        for k in 0..p.len() {
            assert_eq!(r.xi[2 * k], p.xi[k]);
        }
        // sub-step increments of the coarse path agree with the refined grid
        let inc = p.sub_increments(3, 2);
        let inc_r = r.sub_increments(6, 1);
        assert_relative_eq!(inc[0], inc_r[0], epsilon = 1e-14);
        assert_relative_eq!(inc[1], inc_r[1], epsilon = 1e-14);
        let rr = r.refine();
        assert_relative_eq!(rr.xi[13] - rr.xi[12], inc[0], epsilon = 1e-14);
        assert_relative_eq!(rr.xi[14] - rr.xi[13], inc[1], epsilon = 1e-14);
    }

    #[test]
    fn two_sided_anchored() {
        let p = sample_two_sided_driving(10.0, 2.0, 1.0, 0.01, 1).unwrap();
        let k0 = p.index_of(0.0).unwrap();
        assert!((0.0..TAU).contains(&p.xi[k0]));
        let q = sample_two_sided_driving(10.0, 2.0, 1.0, 0.01, 1).unwrap();
        assert_eq!(p, q);
        assert_relative_eq!(p.t0, -2.0, epsilon = 1e-9);
        assert_relative_eq!(p.horizon(), 1.0, epsilon = 1e-9);
    }
}
