//! Field samples: Gaussian part, log singularities, zero mode and weight.

use super::coord::ConformalMap;
use super::factor::CovarianceFactorization;
use super::grid::{GridSpec, Layout};
use super::kernel::{disk_kernel, halfplane_kernel};
use crate::error::{invalid, Error, Result};
use crate::gmc;
use crate::params::LqgParams;
use crate::rng::{derive_seed, rng_from};
use crate::C64;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Exponential-functional draws that stand in for the chaos mass inside the
/// exclusion disk around an insertion (see `gmc`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tails {
    pub gamma: f64,
    /// Gamma variate entering the area tail.
    pub area: f64,
    /// Gamma variate entering the boundary-length tail (boundary insertions).
    pub length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Insertion {
    pub alpha: f64,
    pub location: C64,
    pub boundary: bool,
    pub tails: Option<Tails>,
}

impl Insertion {
    /// Coefficient of the Green function: alpha inside, beta/2 on the boundary.
    pub fn coefficient(&self) -> f64 {
        if self.boundary {
            0.5 * self.alpha
        } else {
            self.alpha
        }
    }
}

/// Root sample and composed map behind a coordinate-changed field.
#[derive(Debug, Clone)]
pub struct Pullback {
    pub base: FieldSample,
    pub map: Arc<dyn ConformalMap>,
    pub q: f64,
}

/// Field on a grid. For a root sample the value at node i is
/// gaussian[i] + sum of insertion terms + constant. A coordinate-changed
/// sample folds the pulled-back insertion terms and the Q log|(g^-1)'| term
/// into `smooth`, keeping `insertions` only to locate the singularities.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub grid: Arc<GridSpec>,
    pub gaussian: Vec<f64>,
    /// Deterministic non-singular part (empty means zero).
    pub smooth: Vec<f64>,
    /// Regularization scale per node (empty means grid.eps everywhere).
    pub scale: Vec<f64>,
    pub insertions: Vec<Insertion>,
    pub constant: f64,
    pub weight: f64,
    pub seed: u64,
    pub origin: Option<Arc<Pullback>>,
}

impl FieldSample {
    pub fn zero(grid: Arc<GridSpec>) -> Self {
        let n = grid.len();
        FieldSample {
            grid,
            gaussian: vec![0.0; n],
            smooth: Vec::new(),
            scale: Vec::new(),
            insertions: Vec::new(),
            constant: 0.0,
            weight: 1.0,
            seed: 0,
            origin: None,
        }
    }

    fn kernel(&self, z: C64, w: C64) -> f64 {
        match self.grid.layout {
            Layout::Rect { .. } => halfplane_kernel(z, w, self.grid.eps),
            _ => disk_kernel(z, w, self.grid.eps),
        }
    }

    /// Sum of the insertion terms at `z` (root samples only).
    pub fn singular_at(&self, z: C64) -> f64 {
        if self.origin.is_some() {
            return 0.0;
        }
        self.insertions.iter().map(|i| i.coefficient() * self.kernel(z, i.location)).sum()
    }

    pub fn smooth_node(&self, i: usize) -> f64 {
        self.smooth.get(i).copied().unwrap_or(0.0)
    }

    pub fn scale_node(&self, i: usize) -> f64 {
        self.scale.get(i).copied().unwrap_or(self.grid.eps)
    }

    /// Deterministic part (smooth + singular) at node i.
    pub fn deterministic(&self, i: usize) -> f64 {
        self.smooth_node(i) + self.singular_at(self.grid.nodes[i])
    }

    pub fn value(&self, i: usize) -> f64 {
        self.gaussian[i] + self.deterministic(i) + self.constant
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.grid.len()).into_par_iter().map(|i| self.value(i)).collect()
    }

    fn stencil(&self, z: C64) -> Result<super::grid::Stencil> {
        self.grid.stencil(z).ok_or_else(|| Error::OutsideGrid(format!("{z}")))
    }

    pub fn gaussian_at(&self, z: C64) -> Result<f64> {
        Ok(self.stencil(z)?.iter().map(|&(i, w)| w * self.gaussian[i]).sum())
    }

    pub fn deterministic_at(&self, z: C64) -> Result<f64> {
        let smooth: f64 = if self.smooth.is_empty() {
            0.0
        } else {
            self.stencil(z)?.iter().map(|&(i, w)| w * self.smooth[i]).sum()
        };
        Ok(smooth + self.singular_at(z))
    }

    pub fn scale_at(&self, z: C64) -> f64 {
        if self.scale.is_empty() {
            return self.grid.eps;
        }
        match self.grid.stencil(z) {
            Some(s) => s.iter().map(|&(i, w)| w * self.scale[i]).sum(),
            None => self.grid.eps,
        }
    }

    /// Variance lost by interpolating the Gaussian part at `z`: kernel at
    /// (z, z) minus the stencil-weighted kernel. Zero at nodes and on grids
    /// without a closed-form kernel.
    pub fn interpolation_deficit(&self, z: C64) -> f64 {
        if matches!(self.grid.layout, Layout::Cylinder { .. }) {
            return 0.0;
        }
        let Some(st) = self.grid.stencil(z) else { return 0.0 };
        if st.len() < 2 {
            return 0.0;
        }
        let nodes = &self.grid.nodes;
        let mut v = 0.0;
        for &(i, a) in &st {
            for &(j, b) in &st {
                v += a * b * self.kernel(nodes[i], nodes[j]);
            }
        }
        (self.kernel(z, z) - v).max(0.0)
    }

    /// Field value at an arbitrary point. Coordinate-changed samples evaluate
    /// the root sample at the preimage.
    pub fn value_at(&self, z: C64) -> Result<f64> {
        if let Some(o) = &self.origin {
            let (p, d) = o.map.pullback(z)?;
            return Ok(o.base.value_at(p)? + o.q * d.norm().ln());
        }
        Ok(self.gaussian_at(z)? + self.deterministic_at(z)? + self.constant)
    }

    /// Average of `value_at` over the part of the circle |z - c| = r inside
    /// the closed domain, on `k` equally spaced angles.
    pub fn circle_average(&self, c: C64, r: f64, k: usize) -> Result<f64> {
        let (a0, a1) = match self.grid.layout {
            Layout::Polar { .. } if c.norm() + r > 1.0 => {
                // arc of the circle inside the unit disk
                let cos = ((1.0 - c.norm_sqr() - r * r) / (2.0 * r * c.norm())).clamp(-1.0, 1.0);
                let half = PI - cos.acos();
                let dir = (-c).arg();
                (dir - half, dir + half)
            }
            Layout::Rect { .. } if c.im < r => {
                let s = (-c.im / r).clamp(-1.0, 1.0).asin();
                (s, PI - s)
            }
            _ => (0.0, 2.0 * PI),
        };
        let mut s = 0.0;
        for j in 0..k {
            let a = a0 + (a1 - a0) * (j as f64 + 0.5) / k as f64;
            s += self.value_at(c + C64::from_polar(r, a))?;
        }
        Ok(s / k as f64)
    }

    /// Average of the Gaussian part over the normalization nodes.
    pub fn normalization_average(&self) -> f64 {
        let nn = &self.grid.normalization;
        if nn.is_empty() {
            return 0.0;
        }
        nn.iter().map(|&i| self.gaussian[i]).sum::<f64>() / nn.len() as f64
    }
}

/// Free-boundary GFF normalized to zero average over the normalization nodes.
pub fn sample_gff(grid: Arc<GridSpec>, fact: &CovarianceFactorization, seed: u64) -> Result<FieldSample> {
    if !fact.matches(&grid) {
        return invalid(format!("factorization for {} nodes does not match grid with {}", fact.n, grid.len()));
    }
    let mut rng = rng_from(derive_seed(seed, 0));
    let mut gaussian = fact.sample(&mut rng);
    let nn = &grid.normalization;
    if !nn.is_empty() {
        let m = nn.iter().map(|&i| gaussian[i]).sum::<f64>() / nn.len() as f64;
        gaussian.iter_mut().for_each(|x| *x -= m);
    }
    Ok(FieldSample { gaussian, seed, ..FieldSample::zero(grid) })
}

/// Shape parameters of the tail Gamma variates: (area, length).
pub fn tail_shapes(params: &LqgParams, alpha: f64, boundary: bool) -> Option<(f64, Option<f64>)> {
    let (g, q) = (params.gamma, params.q);
    if alpha >= q {
        return None;
    }
    if boundary {
        Some(((q - alpha) / g, Some(2.0 * (q - alpha) / g)))
    } else {
        Some((2.0 * (q - alpha) / g, None))
    }
}

/// Liouville field on a disk grid with the given (alpha, location, boundary)
/// insertions. Insertions with alpha >= Q get no tail draws and cannot be
/// integrated by `gmc`.
pub fn sample_lf_disk(
    params: &LqgParams,
    insertions: &[(f64, C64, bool)],
    grid: Arc<GridSpec>,
    fact: &CovarianceFactorization,
    seed: u64,
) -> Result<FieldSample> {
    let mut f = sample_gff(grid, fact, seed)?;
    let mut rng = rng_from(derive_seed(seed, 1));
    for &(alpha, location, boundary) in insertions {
        if !alpha.is_finite() {
            return invalid("insertion weight must be finite");
        }
        if boundary && (location.norm() - 1.0).abs() > 1e-9 && !matches!(f.grid.layout, Layout::Rect { .. }) {
            return invalid(format!("boundary insertion at {location} is not on the unit circle"));
        }
        let tails = match tail_shapes(params, alpha, boundary) {
            Some((a, l)) => {
                let area = Gamma::new(a, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(&mut rng);
                let length = match l {
                    Some(s) => Some(Gamma::new(s, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(&mut rng)),
                    None => None,
                };
                Some(Tails { gamma: params.gamma, area, length })
            }
            None => None,
        };
        f.insertions.push(Insertion { alpha, location, boundary, tails });
    }
    Ok(f)
}

/// Liouville field with boundary length exactly `ell`: insertions
/// (alpha, 0) and (beta, 1), constant (2/gamma) log(ell/L), weight
/// (2/gamma) ell^{e-1} / L^e with e = (2 alpha + beta - 2Q)/gamma.
pub fn sample_lf_disk_fixed_length(
    params: &LqgParams,
    alpha: f64,
    beta: f64,
    ell: f64,
    grid: Arc<GridSpec>,
    fact: &CovarianceFactorization,
    seed: u64,
) -> Result<FieldSample> {
    if beta >= params.q {
        return Err(Error::Seiberg { alpha: beta, q: params.q });
    }
    if !(ell > 0.0) || !ell.is_finite() {
        return invalid(format!("boundary length must be positive, got {ell}"));
    }
    let mut f = sample_lf_disk(params, &[(alpha, C64::new(0.0, 0.0), false), (beta, C64::new(1.0, 0.0), true)], grid, fact, seed)?;
    let big_l = gmc::boundary_measure(&f, params.gamma, None)?.total();
    if !(big_l > 0.0) || !big_l.is_finite() {
        return Err(Error::Diagnostic(format!("boundary length {big_l} of the unscaled field")));
    }
    let g = params.gamma;
    let e = (2.0 * alpha + beta - 2.0 * params.q) / g;
    f.constant = (2.0 / g) * (ell / big_l).ln();
    f.weight = (2.0 / g) * ell.powf(e - 1.0) / big_l.powf(e);
    Ok(f)
}

/// Reweight samples from the alpha1-insertion law at 0 toward the alpha2 law
/// by eps^{(alpha2^2 - alpha1^2)/2} exp((alpha2 - alpha1) theta), with theta
/// the field average over the grid ring nearest |z| = eps.
pub fn girsanov_reweight(samples: &[FieldSample], alpha1: f64, alpha2: f64, eps: f64) -> Result<Vec<FieldSample>> {
    if alpha1 == alpha2 {
        return Ok(samples.to_vec());
    }
    let da = alpha2 - alpha1;
    let log_norm = 0.5 * (alpha2 * alpha2 - alpha1 * alpha1) * eps.ln();
    samples
        .iter()
        .map(|s| {
            let (_, ring) = s.grid.ring_nearest(eps)?;
            let theta = ring.iter().map(|&i| s.value(i)).sum::<f64>() / ring.len() as f64;
            let w = s.weight * (log_norm + da * theta).exp();
            if !w.is_finite() {
                return Err(Error::NonFinite("girsanov weight"));
            }
            Ok(FieldSample { weight: w, ..s.clone() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> (Arc<GridSpec>, CovarianceFactorization) {
        let g = Arc::new(GridSpec::polar_disk(16, 32, 0.03).unwrap());
        let f = CovarianceFactorization::new(&g).unwrap();
        (g, f)
    }

    #[test]
    fn gff_boundary_average_is_zero() {
        let (g, f) = small();
        for seed in 0..20 {
            let s = sample_gff(g.clone(), &f, seed).unwrap();
            assert!(s.normalization_average().abs() < 1e-10);
            assert_eq!(s.weight, 1.0);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let (_, f) = small();
        let other = Arc::new(GridSpec::polar_disk(8, 32, 0.03).unwrap());
        assert!(sample_gff(other, &f, 1).is_err());
    }

    #[test]
    fn decomposition_is_exact() {
        let (g, f) = small();
        let p = LqgParams::from_gamma(1.0).unwrap();
        let s = sample_lf_disk(&p, &[(1.5, C64::new(0.0, 0.0), false), (0.5, C64::new(1.0, 0.0), true)], g.clone(), &f, 4).unwrap();
        let s = FieldSample { constant: 0.7, ..s };
        for i in (0..g.len()).step_by(37) {
            let z = g.nodes[i];
            let singular = 1.5 * disk_kernel(z, C64::new(0.0, 0.0), g.eps) + 0.25 * disk_kernel(z, C64::new(1.0, 0.0), g.eps);
            let want = s.gaussian[i] + (0.0 + singular) + 0.7;
            assert_eq!(s.value(i), want);
        }
    }

    #[test]
    fn fixed_length_rescaling() {
        let (g, f) = small();
        let p = LqgParams::from_gamma(1.0).unwrap();
        let (alpha, beta) = (p.q - 0.25, 1.5);
        let a = sample_lf_disk_fixed_length(&p, alpha, beta, 1.0, g.clone(), &f, 9).unwrap();
        let b = sample_lf_disk_fixed_length(&p, alpha, beta, 2.5, g.clone(), &f, 9).unwrap();
        assert_relative_eq!(gmc::boundary_measure(&a, 1.0, None).unwrap().total(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(gmc::boundary_measure(&b, 1.0, None).unwrap().total(), 2.5, epsilon = 1e-12);
        assert_relative_eq!(b.constant - a.constant, 2.0 * 2.5f64.ln(), epsilon = 1e-12);
        assert_eq!(a.gaussian, b.gaussian);
        // exponent 1: weight = (2/gamma)/L
        let big_l = (-a.constant * 0.5).exp();
        assert_relative_eq!(a.weight, 2.0 / big_l, epsilon = 1e-12);
        assert!(sample_lf_disk_fixed_length(&p, alpha, p.q, 1.0, g, &f, 1).is_err());
    }

    #[test]
    fn girsanov_identity_and_eps_errors() {
        let (g, f) = small();
        let s = vec![sample_gff(g.clone(), &f, 1).unwrap()];
        let r = girsanov_reweight(&s, 1.0, 1.0, 0.05).unwrap();
        assert_eq!(r[0].weight, 1.0);
        assert!(matches!(girsanov_reweight(&s, 1.0, 2.0, 3.0), Err(Error::UnrepresentableEps(_))));
    }
}
