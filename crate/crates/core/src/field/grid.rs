//! Sample grids: polar disk, half-plane rectangle, cylinder.

use crate::error::{invalid, Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Disk,
    HalfPlaneRectangle,
    Cylinder,
}

/// Parameters that determine a grid completely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "kebab-case")]
pub enum Layout {
    /// Rings at radius (i + 1/2)/rings plus a boundary ring at radius 1;
    /// angles at 2 pi (m + 1/2)/angles on every ring.
    Polar { rings: usize, angles: usize },
    /// Interior lattice over [-half_width, half_width] x (0, height] plus the
    /// boundary row on the real axis and `normalization` extra nodes on the
    /// unit upper semicircle.
    Rect { nx: usize, ny: usize, half_width: f64, height: f64, normalization: usize },
    /// s + i theta with s in (-horizon, horizon), theta in [0, 2 pi).
    Cylinder { ns: usize, angles: usize, horizon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    #[serde(flatten)]
    pub layout: Layout,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub domain: Domain,
    pub layout: Layout,
    pub eps: f64,
    pub nodes: Vec<C64>,
    /// Counterclockwise (left to right on the real axis).
    pub boundary_nodes: Vec<usize>,
    /// Euclidean area carried by each node (0 on the boundary).
    pub cell_area: Vec<f64>,
    /// Euclidean length of the boundary arc centered at each boundary node.
    pub arc_length: Vec<f64>,
    /// Nodes whose uniform average is the normalization functional.
    pub normalization: Vec<usize>,
}

/// Linear interpolation stencil.
pub type Stencil = Vec<(usize, f64)>;

impl GridSpec {
    pub fn polar_disk(rings: usize, angles: usize, eps: f64) -> Result<Self> {
        if rings < 2 || angles < 4 || angles % 2 != 0 {
            return invalid(format!("polar grid needs rings >= 2 and even angles >= 4, got {rings}x{angles}"));
        }
        check_eps(eps, 0.5)?;
        let (r, m) = (rings, angles);
        let mut nodes = Vec::with_capacity((r + 1) * m);
        let mut cell_area = Vec::with_capacity((r + 1) * m);
        for i in 0..=r {
            let rho = if i == r { 1.0 } else { (i as f64 + 0.5) / r as f64 };
            let a = if i == r { 0.0 } else { PI * (2 * i + 1) as f64 / (r * r * m) as f64 };
            for k in 0..m {
                nodes.push(C64::from_polar(rho, TAU * (k as f64 + 0.5) / m as f64));
                cell_area.push(a);
            }
        }
        let boundary_nodes: Vec<usize> = (r * m..(r + 1) * m).collect();
        Ok(GridSpec {
            domain: Domain::Disk,
            layout: Layout::Polar { rings, angles },
            eps,
            nodes,
            arc_length: vec![TAU / m as f64; m],
            normalization: boundary_nodes.clone(),
            boundary_nodes,
            cell_area,
        })
    }

    /// 256 rings x 256 angles, eps = 2 pi / 512.
    pub fn disk_default() -> Self {
        Self::polar_disk(256, 256, TAU / 512.0).expect("default grid")
    }

    pub fn halfplane_rect(nx: usize, ny: usize, half_width: f64, height: f64, normalization: usize, eps: f64) -> Result<Self> {
        if nx < 2 || ny < 1 || normalization < 2 || !(half_width > 0.0) || !(height > 0.0) {
            return invalid("half-plane grid dimensions");
        }
        check_eps(eps, height)?;
        let dx = 2.0 * half_width / (nx - 1) as f64;
        let dy = height / ny as f64;
        let mut nodes = Vec::new();
        let mut cell_area = Vec::new();
        for j in 1..=ny {
            for i in 0..nx {
                nodes.push(C64::new(-half_width + i as f64 * dx, j as f64 * dy));
                cell_area.push(dx * dy);
            }
        }
        let b0 = nodes.len();
        for i in 0..nx {
            nodes.push(C64::new(-half_width + i as f64 * dx, 0.0));
            cell_area.push(0.0);
        }
        let n0 = nodes.len();
        for k in 0..normalization {
            nodes.push(C64::from_polar(1.0, PI * (k as f64 + 0.5) / normalization as f64));
            cell_area.push(0.0);
        }
        Ok(GridSpec {
            domain: Domain::HalfPlaneRectangle,
            layout: Layout::Rect { nx, ny, half_width, height, normalization },
            eps,
            boundary_nodes: (b0..b0 + nx).collect(),
            arc_length: vec![dx; nx],
            normalization: (n0..n0 + normalization).collect(),
            nodes,
            cell_area,
        })
    }

    pub fn cylinder(ns: usize, angles: usize, horizon: f64, eps: f64) -> Result<Self> {
        if ns < 2 || angles < 4 || angles % 2 != 0 || !(horizon > 0.0) {
            return invalid("cylinder grid dimensions");
        }
        check_eps(eps, PI)?;
        let ds = 2.0 * horizon / ns as f64;
        let mut nodes = Vec::with_capacity(ns * angles);
        for k in 0..ns {
            let s = -horizon + (k as f64 + 0.5) * ds;
            for m in 0..angles {
                nodes.push(C64::new(s, TAU * m as f64 / angles as f64));
            }
        }
        let n = nodes.len();
        Ok(GridSpec {
            domain: Domain::Cylinder,
            layout: Layout::Cylinder { ns, angles, horizon },
            eps,
            nodes,
            boundary_nodes: Vec::new(),
            cell_area: vec![ds * TAU / angles as f64; n],
            arc_length: Vec::new(),
            normalization: Vec::new(),
        })
    }

    pub fn from_descriptor(d: &GridDescriptor) -> Result<Self> {
        match d.layout {
            Layout::Polar { rings, angles } => Self::polar_disk(rings, angles, d.eps),
            Layout::Rect { nx, ny, half_width, height, normalization } => {
                Self::halfplane_rect(nx, ny, half_width, height, normalization, d.eps)
            }
            Layout::Cylinder { ns, angles, horizon } => Self::cylinder(ns, angles, horizon, d.eps),
        }
    }

    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor { layout: self.layout, eps: self.eps }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Boundary angle of boundary node `m` (disk only).
    pub fn boundary_angle(&self, m: usize) -> f64 {
        match self.layout {
            Layout::Polar { angles, .. } => TAU * (m as f64 + 0.5) / angles as f64,
            _ => self.nodes[self.boundary_nodes[m]].arg(),
        }
    }

    /// Nodes of the ring whose radius is closest to `r` (disk only).
    pub fn ring_nearest(&self, r: f64) -> Result<(f64, Vec<usize>)> {
        let Layout::Polar { rings, angles } = self.layout else {
            return invalid("ring_nearest on a non-polar grid");
        };
        if !(r > 0.0) || r > 1.0 {
            return Err(Error::UnrepresentableEps(r));
        }
        let i = ((r * rings as f64 - 0.5).round().max(0.0) as usize).min(rings - 1);
        let rho = (i as f64 + 0.5) / rings as f64;
        if (rho - r).abs() > 0.5 * r.max(0.5 / rings as f64) {
            return Err(Error::UnrepresentableEps(r));
        }
        Ok((rho, (i * angles..(i + 1) * angles).collect()))
    }

    /// Linear interpolation stencil at `z`, or None outside the grid.
    pub fn stencil(&self, z: C64) -> Option<Stencil> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return None;
        }
        match self.layout {
            Layout::Polar { rings, angles } => polar_stencil(rings, angles, z),
            Layout::Rect { nx, ny, half_width, height, .. } => {
                let dx = 2.0 * half_width / (nx - 1) as f64;
                let dy = height / ny as f64;
                let x = (z.re + half_width) / dx;
                let y = z.im / dy;
                let tol = 1e-9;
                if x < -tol || x > (nx - 1) as f64 + tol || y < -tol || y > ny as f64 + tol {
                    return None;
                }
                let i0 = (x.floor().max(0.0) as usize).min(nx - 2);
                let j0 = (y.floor().max(0.0) as usize).min(ny - 1);
                let fx = (x - i0 as f64).clamp(0.0, 1.0);
                let fy = (y - j0 as f64).clamp(0.0, 1.0);
                // row j (0 = real axis) -> node index
                let b0 = nx * ny;
                let idx = |i: usize, j: usize| if j == 0 { b0 + i } else { (j - 1) * nx + i };
                Some(vec![
                    (idx(i0, j0), (1.0 - fx) * (1.0 - fy)),
                    (idx(i0 + 1, j0), fx * (1.0 - fy)),
                    (idx(i0, j0 + 1), (1.0 - fx) * fy),
                    (idx(i0 + 1, j0 + 1), fx * fy),
                ])
            }
            Layout::Cylinder { ns, angles, horizon } => {
                let ds = 2.0 * horizon / ns as f64;
                let s = (z.re + horizon) / ds - 0.5;
                if s < -1e-9 || s > (ns - 1) as f64 + 1e-9 {
                    return None;
                }
                let k0 = (s.floor().max(0.0) as usize).min(ns - 2);
                let fs = (s - k0 as f64).clamp(0.0, 1.0);
                let a = z.im.rem_euclid(TAU) * angles as f64 / TAU;
                let m0 = (a.floor() as usize) % angles;
                let fa = a - a.floor();
                let m1 = (m0 + 1) % angles;
                Some(vec![
                    (k0 * angles + m0, (1.0 - fs) * (1.0 - fa)),
                    (k0 * angles + m1, (1.0 - fs) * fa),
                    ((k0 + 1) * angles + m0, fs * (1.0 - fa)),
                    ((k0 + 1) * angles + m1, fs * fa),
                ])
            }
        }
    }

    pub fn interpolate(&self, values: &[f64], z: C64) -> Option<f64> {
        self.stencil(z).map(|s| s.iter().map(|&(i, w)| w * values[i]).sum())
    }
}

fn check_eps(eps: f64, max: f64) -> Result<()> {
    if !(eps > 0.0) || eps >= max {
        return Err(Error::UnrepresentableEps(eps));
    }
    Ok(())
}

fn polar_stencil(rings: usize, angles: usize, z: C64) -> Option<Stencil> {
    let r = z.norm();
    if r > 1.0 + 1e-9 {
        return None;
    }
    let m = angles;
    let a = z.arg().rem_euclid(TAU) * m as f64 / TAU - 0.5;
    let af = a.floor();
    let fa = a - af;
    let m0 = (af as i64).rem_euclid(m as i64) as usize;
    let m1 = (m0 + 1) % m;
    let radius = |i: usize| if i == rings { 1.0 } else { (i as f64 + 0.5) / rings as f64 };
    let r0 = radius(0);
    if r < r0 {
        // blend toward the ring-0 average at the center
        let f = r / r0;
        let mut s: Stencil = (0..m).map(|k| (k, (1.0 - f) / m as f64)).collect();
        s[m0].1 += f * (1.0 - fa);
        s[m1].1 += f * fa;
        return Some(s);
    }
    let i0 = if r >= radius(rings - 1) { rings - 1 } else { (r * rings as f64 - 0.5).floor() as usize };
    let f = ((r.min(1.0) - radius(i0)) / (radius(i0 + 1) - radius(i0))).clamp(0.0, 1.0);
    Some(vec![
        (i0 * m + m0, (1.0 - f) * (1.0 - fa)),
        (i0 * m + m1, (1.0 - f) * fa),
        ((i0 + 1) * m + m0, f * (1.0 - fa)),
        ((i0 + 1) * m + m1, f * fa),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn polar_areas_sum_to_pi() {
        let g = GridSpec::polar_disk(16, 24, 0.01).unwrap();
        assert_relative_eq!(g.cell_area.iter().sum::<f64>(), PI, epsilon = 1e-12);
        assert_relative_eq!(g.arc_length.iter().sum::<f64>(), TAU, epsilon = 1e-12);
        assert_eq!(g.boundary_nodes.len(), 24);
        // counterclockwise
        for w in g.boundary_nodes.windows(2) {
            assert!(g.nodes[w[0]].arg() < g.nodes[w[1]].arg() || g.nodes[w[1]].arg() < 0.0);
        }
    }

    #[test]
    fn stencil_reproduces_nodes() {
        let g = GridSpec::polar_disk(8, 16, 0.01).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| i as f64).collect();
        for i in 0..g.len() {
            assert_relative_eq!(g.interpolate(&vals, g.nodes[i]).unwrap(), vals[i], epsilon = 1e-9);
        }
        let h = GridSpec::halfplane_rect(9, 5, 2.0, 2.0, 8, 0.01).unwrap();
        let vals: Vec<f64> = (0..h.len()).map(|i| (i * i) as f64).collect();
        for i in 0..h.len() - 8 {
            assert_relative_eq!(h.interpolate(&vals, h.nodes[i]).unwrap(), vals[i], epsilon = 1e-9);
        }
        let c = GridSpec::cylinder(6, 8, 3.0, 0.1).unwrap();
        let vals: Vec<f64> = (0..c.len()).map(|i| (i as f64).sin()).collect();
        for i in 0..c.len() {
            assert_relative_eq!(c.interpolate(&vals, c.nodes[i]).unwrap(), vals[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_bad_eps() {
        assert!(matches!(GridSpec::polar_disk(8, 8, 0.0), Err(Error::UnrepresentableEps(_))));
        assert!(GridSpec::polar_disk(8, 7, 0.01).is_err());
        assert!(GridSpec::disk_default().ring_nearest(2.0).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        let g = GridSpec::halfplane_rect(5, 4, 1.0, 1.0, 6, 0.05).unwrap();
        let d: GridDescriptor = serde_json::from_str(&serde_json::to_string(&g.descriptor()).unwrap()).unwrap();
        assert_eq!(GridSpec::from_descriptor(&d).unwrap(), g);
    }

    proptest! {
        #[test]
        fn stencil_is_partition_of_unity(r in 0.0f64..1.0, t in -7.0f64..7.0) {
            let g = GridSpec::polar_disk(10, 12, 0.01).unwrap();
            let s = g.stencil(C64::from_polar(r, t)).unwrap();
            let total: f64 = s.iter().map(|x| x.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(s.iter().all(|x| x.1 >= -1e-15));
        }

        #[test]
        fn linear_functions_exact_on_rect(x in -1.9f64..1.9, y in 0.0f64..1.9) {
            let g = GridSpec::halfplane_rect(11, 7, 2.0, 2.0, 4, 0.01).unwrap();
            let vals: Vec<f64> = g.nodes.iter().map(|z| 2.0 * z.re - z.im + 0.5).collect();
            let v = g.interpolate(&vals, C64::new(x, y)).unwrap();
            prop_assert!((v - (2.0 * x - y + 0.5)).abs() < 1e-9);
        }
    }
}
