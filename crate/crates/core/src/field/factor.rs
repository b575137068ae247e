//! Covariance factorizations of the regularized field.

use super::grid::{GridDescriptor, GridSpec, Layout};
use super::kernel::{disk_kernel, halfplane_kernel};
use crate::error::{invalid, Error, Result};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

#[derive(Debug, Clone)]
enum Backend {
    Dense {
        lower: DMatrix<f64>,
    },
    /// One (rings+1)-square factor per angular frequency 0..=angles/2.
    Polar {
        angles: usize,
        size: usize,
        factors: Vec<DMatrix<f64>>,
    },
}

/// Factor F with F F^T equal to the regularized covariance at the grid nodes.
#[derive(Debug, Clone)]
pub struct CovarianceFactorization {
    pub grid: GridDescriptor,
    pub n: usize,
    /// Largest relative diagonal jitter used by any block.
    pub jitter: f64,
    /// Total negative eigenvalue mass clipped by the eigen fallback (0 if unused).
    pub clipped: f64,
    backend: Backend,
}

/// Regularized covariance between two nodes of `grid`.
pub fn covariance_kernel(grid: &GridSpec, z: C64, w: C64) -> Result<f64> {
    match grid.layout {
        Layout::Polar { .. } => Ok(disk_kernel(z, w, grid.eps)),
        Layout::Rect { .. } => Ok(halfplane_kernel(z, w, grid.eps)),
        Layout::Cylinder { .. } => invalid("cylinder fields are sampled by sample_sphere_field"),
    }
}

/// Covariance of x - mean(x over `nodes`), in place.
fn project(m: &mut DMatrix<f64>, nodes: &[usize]) {
    if nodes.is_empty() {
        return;
    }
    let n = m.nrows();
    let k = nodes.len() as f64;
    let c: Vec<f64> = (0..n).map(|i| nodes.iter().map(|&b| m[(i, b)]).sum::<f64>() / k).collect();
    let cbb = nodes.iter().map(|&b| c[b]).sum::<f64>() / k;
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] += cbb - c[i] - c[j];
        }
    }
}

/// Regularized covariance of the normalized field: the kernel with the
/// average over the normalization nodes projected out.
pub fn projected_kernel(grid: &GridSpec, i: usize, j: usize) -> Result<f64> {
    let nn = &grid.normalization;
    let k = |a: usize, b: usize| covariance_kernel(grid, grid.nodes[a], grid.nodes[b]);
    if nn.is_empty() {
        return k(i, j);
    }
    let avg = |a: usize| -> Result<f64> { Ok(nn.iter().map(|&b| k(a, b)).sum::<Result<f64>>()? / nn.len() as f64) };
    let mut cbb = 0.0;
    for &b in nn {
        cbb += avg(b)?;
    }
    cbb /= nn.len() as f64;
    Ok(k(i, j)? - avg(i)? - avg(j)? + cbb)
}

/// Cholesky with escalating diagonal jitter, falling back to a clipped
/// eigendecomposition. Returns (factor, jitter, clipped mass).
fn robust_factor(m: DMatrix<f64>) -> Result<(DMatrix<f64>, f64, f64)> {
    let n = m.nrows();
    let trace: f64 = m.diagonal().iter().map(|x| x.abs()).sum::<f64>().max(1e-300);
    let mut rel = 1e-12;
    while rel <= 1e-8 {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] += rel * trace;
        }
        if let Some(c) = a.cholesky() {
            return Ok((c.l(), rel, 0.0));
        }
        rel *= 10.0;
    }
    let eig = m.symmetric_eigen();
    let mut clipped = 0.0;
    let mut v = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        if !l.is_finite() {
            return Err(Error::Factorization("non-finite eigenvalue".into()));
        }
        if l < 0.0 {
            clipped -= l;
        }
        let s = l.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    if clipped > 1e-6 * trace {
        return Err(Error::Factorization(format!("covariance has negative mass {clipped:.3e}")));
    }
    Ok((v, 0.0, clipped))
}

impl CovarianceFactorization {
    /// Block-circulant route on polar grids, dense Cholesky otherwise.
    pub fn new(grid: &GridSpec) -> Result<Self> {
        match grid.layout {
            Layout::Polar { .. } => Self::polar(grid),
            _ => Self::dense(grid),
        }
    }

    pub fn dense(grid: &GridSpec) -> Result<Self> {
        let n = grid.len();
        if n > 20_000 {
            return invalid(format!("dense factorization of {n} nodes"));
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let c = covariance_kernel(grid, grid.nodes[i], grid.nodes[j])?;
                m[(i, j)] = c;
                m[(j, i)] = c;
            }
        }
        project(&mut m, &grid.normalization);
        let (lower, jitter, clipped) = robust_factor(m)?;
        Ok(CovarianceFactorization { grid: grid.descriptor(), n, jitter, clipped, backend: Backend::Dense { lower } })
    }

    fn polar(grid: &GridSpec) -> Result<Self> {
        let Layout::Polar { rings, angles } = grid.layout else {
            return invalid("polar factorization on a non-polar grid");
        };
        let size = rings + 1;
        let m = angles;
        let eps = grid.eps;
        let radius = |i: usize| grid.nodes[i * m].norm();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
        // spectra[i*size + j][k] = sum_d c_ij(d) cos(2 pi k d / m)
        let pairs: Vec<(usize, usize)> = (0..size).flat_map(|i| (i..size).map(move |j| (i, j))).collect();
        let spectra: Vec<Vec<f64>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (ri, rj) = (radius(i), radius(j));
                let mut buf: Vec<C64> = (0..m)
                    .map(|d| C64::new(disk_kernel(C64::new(ri, 0.0), C64::from_polar(rj, TAU * d as f64 / m as f64), eps), 0.0))
                    .collect();
                fft.process(&mut buf);
                buf[..=m / 2].iter().map(|c| c.re).collect()
            })
            .collect();
        let blocks: Vec<Result<(DMatrix<f64>, f64, f64)>> = (0..=m / 2)
            .into_par_iter()
            .map(|k| {
                let mut a = DMatrix::zeros(size, size);
                for (p, &(i, j)) in pairs.iter().enumerate() {
                    a[(i, j)] = spectra[p][k];
                    a[(j, i)] = spectra[p][k];
                }
                if k == 0 {
                    // only the ring-average mode sees the boundary average
                    let b = size - 1;
                    let c = a.clone();
                    for i in 0..size {
                        for j in 0..size {
                            a[(i, j)] = c[(i, j)] - c[(i, b)] - c[(b, j)] + c[(b, b)];
                        }
                    }
                }
                robust_factor(a)
            })
            .collect();
        let mut factors = Vec::with_capacity(blocks.len());
        let (mut jitter, mut clipped) = (0.0f64, 0.0);
        for b in blocks {
            let (f, j, c) = b?;
            jitter = jitter.max(j);
            clipped += c;
            factors.push(f);
        }
        Ok(CovarianceFactorization {
            grid: grid.descriptor(),
            n: grid.len(),
            jitter,
            clipped,
            backend: Backend::Polar { angles: m, size, factors },
        })
    }

    pub fn matches(&self, grid: &GridSpec) -> bool {
        self.grid == grid.descriptor() && self.n == grid.len()
    }

    /// One draw with covariance F F^T (no normalization applied).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.backend {
            Backend::Dense { lower } => {
                let z = DVector::from_iterator(self.n, (0..self.n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                (lower * z).iter().copied().collect()
            }
            Backend::Polar { angles, size, factors } => {
                let m = *angles;
                let half = m / 2;
                let mut spec = vec![C64::new(0.0, 0.0); size * m];
                let sqrt2 = std::f64::consts::SQRT_2;
                for (k, f) in factors.iter().enumerate() {
                    let a = DVector::from_iterator(*size, (0..*size).map(|_| rng.sample::<f64, _>(StandardNormal)));
                    let u = f * a;
                    if k == 0 || k == half {
                        for i in 0..*size {
                            spec[i * m + k] = C64::new(u[i], 0.0);
                        }
                    } else {
                        let b = DVector::from_iterator(*size, (0..*size).map(|_| rng.sample::<f64, _>(StandardNormal)));
                        let v = f * b;
                        for i in 0..*size {
                            spec[i * m + k] = C64::new(sqrt2 * u[i], -sqrt2 * v[i]);
                        }
                    }
                }
                let ifft = FftPlanner::<f64>::new().plan_fft_inverse(m);
                let scale = 1.0 / (m as f64).sqrt();
                let mut out = Vec::with_capacity(size * m);
                for row in spec.chunks_mut(m) {
                    ifft.process(row);
                    out.extend(row.iter().map(|c| c.re * scale));
                }
                out
            }
        }
    }

    /// Entry (i, j) of F F^T.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        match &self.backend {
            Backend::Dense { lower } => lower.row(i).dot(&lower.row(j)),
            Backend::Polar { angles, size: _, factors } => {
                let m = *angles;
                let (ri, mi) = (i / m, i % m);
                let (rj, mj) = (j / m, j % m);
                let d = (mj + m - mi) % m;
                let mut s = 0.0;
                for k in 0..m {
                    let f = &factors[k.min(m - k)];
                    let lam = f.row(ri).dot(&f.row(rj));
                    s += lam * (TAU * (k * d) as f64 / m as f64).cos();
                }
                s / m as f64
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::kernel::green_disk;
    use crate::rng::rng_from;
    use approx::assert_relative_eq;

    #[test]
    fn polar_matches_dense_kernel() {
        let g = GridSpec::polar_disk(6, 12, 0.02).unwrap();
        let f = CovarianceFactorization::new(&g).unwrap();
        let d = CovarianceFactorization::dense(&g).unwrap();
        for i in (0..g.len()).step_by(5) {
            for j in (0..g.len()).step_by(7) {
                let want = projected_kernel(&g, i, j).unwrap();
                assert_relative_eq!(d.covariance(i, j), want, epsilon = 1e-8 * want.abs().max(1.0));
                assert_relative_eq!(f.covariance(i, j), want, epsilon = 1e-8 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn separated_entries_match_green() {
        let g = GridSpec::polar_disk(12, 16, 0.01).unwrap();
        let f = CovarianceFactorization::new(&g).unwrap();
        let mut checked = 0;
        for i in (0..g.len()).step_by(11) {
            for j in (0..g.len()).step_by(13) {
                if (g.nodes[i] - g.nodes[j]).norm() > 3.0 * g.eps {
                    // G minus the projection terms of the boundary average
                    let shift = projected_kernel(&g, i, j).unwrap() - disk_kernel(g.nodes[i], g.nodes[j], g.eps);
                    let want = green_disk(g.nodes[i], g.nodes[j]).unwrap() + shift;
                    assert!((f.covariance(i, j) - want).abs() < 1e-8, "{i} {j}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn dense_halfplane_factorizes() {
        let g = GridSpec::halfplane_rect(9, 5, 2.0, 2.0, 6, 0.05).unwrap();
        let f = CovarianceFactorization::new(&g).unwrap();
        assert!(f.matches(&g));
        let want = projected_kernel(&g, 3, 20).unwrap();
        assert_relative_eq!(f.covariance(3, 20), want, epsilon = 1e-8);
    }

    #[test]
    fn polar_sample_variance() {
        let g = GridSpec::polar_disk(6, 8, 0.05).unwrap();
        let f = CovarianceFactorization::new(&g).unwrap();
        let mut rng = rng_from(3);
        let (i, j) = (9, 40);
        let n = 20000;
        let (mut sii, mut sij) = (0.0, 0.0);
        for _ in 0..n {
            let x = f.sample(&mut rng);
            sii += x[i] * x[i];
            sij += x[i] * x[j];
        }
        let (cii, cij) = (f.covariance(i, i), f.covariance(i, j));
        // 5 standard errors of the second-moment estimators
        assert!((sii / n as f64 - cii).abs() < 5.0 * (2.0 * cii * cii / n as f64).sqrt());
        let se = ((cii * f.covariance(j, j) + cij * cij) / n as f64).sqrt();
        assert!((sij / n as f64 - cij).abs() < 5.0 * se);
    }
}
