//! Reading the boundary-length process off a Loewner chain drawn on a field.
//!
//! At a capacity time t let g be the chain's map and U the driving value, and
//! write the centered map as g/U (tip at 1). The pushed field
//! h o (g/U)^{-1} + Q log|((g/U)^{-1})'| lives on the unit disk (or on the
//! exterior of the unit circle for whole-plane chains), and its boundary
//! chaos on the unit circle is taken as the quantum length of the current
//! boundary: unswallowed original boundary plus both sides of the hull.
//! Lengths use semicircle averages of the pushed field at a fixed radius.
//!
//! Splitting that circle at the tip and at a reference point gives two arcs;
//! their length changes over an interval are the increments of X and Y. The
//! reference point is put at the antipode of the tip at every schedule time
//! and flowed to the next one. Since both arcs always partition the circle,
//! L_t - L_0 = X_t + Y_t holds exactly for the discretized lengths.

use crate::error::{invalid, Error, Result};
use crate::field::{FieldSample, Layout};
use crate::gmc::{area_measure, arc_split, Atom, AtomId, ChaosMeasure, MeasureKind};
use crate::loewner::{flow_boundary_angle, invert_within, retrack, retreat_map, Direction, Geometry, LoewnerChain};
use crate::params::LqgParams;
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Centered map onto the unit disk.
    Disk,
    /// Centered map onto the exterior of the unit disk.
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub boundary_nodes: usize,
    pub semicircle_points: usize,
    /// Semicircle radius; defaults to the field grid's eps.
    pub radius: Option<f64>,
    /// Maximum bisection depth when the reference point is swallowed.
    pub max_refine: u32,
    pub inversion_tol: f64,
    /// Residual accepted from a non-converged inversion, relative to the
    /// semicircle radius.
    pub inversion_accept: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { boundary_nodes: 256, semicircle_points: 8, radius: None, max_refine: 4, inversion_tol: 1e-10, inversion_accept: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLengthProcess {
    pub capacity_times: Vec<f64>,
    pub area_times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    /// Quadrature error estimate of L: difference to the half-resolution sum.
    pub tolerance: Vec<f64>,
    pub ell0: f64,
    /// All tracked area was swallowed by the last schedule time.
    pub terminated: bool,
    /// Number of extra times inserted because the reference point was swallowed.
    pub refinements: usize,
    /// Semicircle points whose preimage came from the backward flow because
    /// Newton inversion failed.
    pub fallback_inversions: usize,
}

impl BoundaryLengthProcess {
    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    /// Max over schedule times of |L - (ell0 + X + Y)| / L.
    pub fn identity_error(&self) -> f64 {
        (0..self.len()).map(|i| (self.l[i] - (self.ell0 + self.x[i] + self.y[i])).abs() / self.l[i].abs()).fold(0.0, f64::max)
    }

    /// (dX, dY, d area) between consecutive schedule times.
    pub fn increments(&self) -> Vec<(f64, f64, f64)> {
        (1..self.len())
            .map(|i| (self.x[i] - self.x[i - 1], self.y[i] - self.y[i - 1], self.area_times[i] - self.area_times[i - 1]))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("area_time,X,Y,L,tolerance\n");
        for i in 0..self.len() {
            let _ = writeln!(s, "{},{},{},{},{}", self.area_times[i], self.x[i], self.y[i], self.l[i], self.tolerance[i]);
        }
        s
    }
}

/// An area atom to be classified by swallowing.
#[derive(Debug, Clone, Copy)]
struct AreaPoint {
    z: C64,
    mass: f64,
    /// Inside the hull when the chain starts.
    at_start: bool,
    tracked: bool,
}

struct Extractor<'a> {
    chain: &'a LoewnerChain,
    base: &'a (dyn Fn(C64) -> Result<f64> + Sync),
    frame: Frame,
    gamma: f64,
    q: f64,
    opts: ExtractOptions,
    radius: f64,
    fallbacks: AtomicUsize,
}

impl Extractor<'_> {
    fn pushed_value(&self, k: usize, w: C64) -> Result<f64> {
        let path = &*self.chain.driving;
        let u = path.value(k);
        let accept = self.opts.inversion_accept * self.radius;
        let t = path.time(k);
        let (z, d) = match invert_within(self.chain, t, u * w, self.opts.inversion_tol, accept) {
            Ok((z, d, _)) => (z, d),
            Err(Error::InversionFailed { .. }) => {
                self.fallbacks.fetch_add(1, Ordering::Relaxed);
                retreat_map(self.chain, t, u * w)?
            }
            Err(e) => return Err(e),
        };
        Ok((self.base)(z)? + self.q * (u * d).norm().ln())
    }

    fn semicircle_average(&self, k: usize, phi: f64) -> Result<f64> {
        let r = self.radius;
        let (dir, half) = match self.frame {
            Frame::Disk => (phi + PI, (0.5 * r).acos()),
            Frame::Exterior => (phi, PI - (0.5 * r).acos()),
        };
        let c = C64::from_polar(1.0, phi);
        let n = self.opts.semicircle_points;
        let mut s = 0.0;
        for j in 0..n {
            let a = dir - half + 2.0 * half * (j as f64 + 0.5) / n as f64;
            s += self.pushed_value(k, c + C64::from_polar(r, a))?;
        }
        Ok(s / n as f64)
    }

    /// Boundary measure of the pushed field at grid index k, and the
    /// quadrature tolerance.
    fn measure(&self, k: usize) -> Result<(ChaosMeasure, f64)> {
        let m = self.opts.boundary_nodes;
        let g = self.gamma;
        let width = TAU / m as f64;
        let pre = self.radius.powf(0.25 * g * g) * width;
        let masses: Vec<Result<f64>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let phi = width * (j as f64 + 0.5);
                let h = self.semicircle_average(k, phi)?;
                let mass = pre * (0.5 * g * h).exp();
                if !mass.is_finite() {
                    return Err(Error::NonFinite("pushed boundary length"));
                }
                Ok(mass)
            })
            .collect();
        let mut atoms = Vec::with_capacity(m);
        for (j, mass) in masses.into_iter().enumerate() {
            let phi = width * (j as f64 + 0.5);
            atoms.push(Atom {
                id: AtomId::Arc(j),
                location: C64::from_polar(1.0, phi),
                size: width,
                mass: mass?,
                span: Some((phi - 0.5 * width, phi + 0.5 * width)),
            });
        }
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        let half: f64 = atoms.iter().step_by(2).map(|a| 2.0 * a.mass).sum();
        Ok((ChaosMeasure { kind: MeasureKind::Boundary, atoms, eps: self.radius, gamma: g }, (total - half).abs()))
    }
}

struct Run<'a> {
    ex: Extractor<'a>,
    cache: BTreeMap<usize, (ChaosMeasure, f64)>,
    refinements: usize,
}

impl Run<'_> {
    fn measure(&mut self, k: usize) -> Result<&(ChaosMeasure, f64)> {
        if !self.cache.contains_key(&k) {
            let m = self.ex.measure(k)?;
            self.cache.insert(k, m);
        }
        Ok(&self.cache[&k])
    }

    /// (dX, dY) over grid indices [ka, kb], bisecting while the reference
    /// point started at the antipode is swallowed.
    fn increment(&mut self, ka: usize, kb: usize, depth: u32) -> Result<(f64, f64)> {
        let tip = C64::new(1.0, 0.0);
        match flow_boundary_angle(self.ex.chain, ka, kb, PI)? {
            Some(phi) => {
                let (a0, b0) = arc_split(&self.measure(ka)?.0, tip, -tip)?;
                let (a1, b1) = arc_split(&self.measure(kb)?.0, tip, C64::from_polar(1.0, phi))?;
                Ok((a1 - a0, b1 - b0))
            }
            None if depth < self.ex.opts.max_refine && kb - ka >= 2 => {
                let mid = ka + (kb - ka) / 2;
                self.refinements += 1;
                let (x1, y1) = self.increment(ka, mid, depth + 1)?;
                let (x2, y2) = self.increment(mid, kb, depth + 1)?;
                Ok((x1 + x2, y1 + y2))
            }
            None => Err(Error::Diagnostic(format!(
                "reference point swallowed on [{}, {}] after {depth} refinements",
                self.ex.chain.driving.time(ka),
                self.ex.chain.driving.time(kb)
            ))),
        }
    }
}

fn schedule_indices(chain: &LoewnerChain, schedule: &[f64]) -> Result<Vec<usize>> {
    if schedule.is_empty() {
        return invalid("empty schedule");
    }
    let idx = schedule
        .iter()
        .map(|&t| chain.driving.index_of(t).ok_or(Error::OutsideHorizon(t)))
        .collect::<Result<Vec<_>>>()?;
    if idx.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("schedule times must be strictly increasing");
    }
    Ok(idx)
}

fn run(ex: Extractor<'_>, points: &[AreaPoint], schedule: &[f64]) -> Result<BoundaryLengthProcess> {
    let chain = ex.chain;
    let idx = schedule_indices(chain, schedule)?;
    // swallowing times of the area atoms on the same driving function
    let tracked: Vec<C64> = points.iter().filter(|p| p.tracked).map(|p| p.z).collect();
    let horizon = chain.driving.time(*idx.last().expect("nonempty"));
    let cells = retrack(chain, &tracked, Some(vec![horizon]))?;
    let mut swallowed: Vec<(f64, f64)> = Vec::new();
    let mut total = 0.0;
    let mut it = cells.tracked.iter();
    for p in points {
        total += p.mass;
        if p.at_start {
            swallowed.push((f64::NEG_INFINITY, p.mass));
        } else if p.tracked {
            if let Some(t) = it.next().expect("one track per point").swallowed_at {
                swallowed.push((t, p.mass));
            }
        }
    }
    swallowed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let area_at = |t: f64| swallowed.iter().take_while(|s| s.0 <= t + 1e-12).fold(0.0, |a, s| a + s.1);

    let mut r = Run { ex, cache: BTreeMap::new(), refinements: 0 };
    let n = idx.len();
    let mut out = BoundaryLengthProcess {
        capacity_times: schedule.to_vec(),
        area_times: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        l: Vec::with_capacity(n),
        tolerance: Vec::with_capacity(n),
        ell0: 0.0,
        terminated: false,
        refinements: 0,
        fallback_inversions: 0,
    };
    let (mut x, mut y) = (0.0, 0.0);
    for (j, &k) in idx.iter().enumerate() {
        if j > 0 {
            let (dx, dy) = r.increment(idx[j - 1], k, 0)?;
            x += dx;
            y += dy;
            // drop measures no longer needed
            r.cache.retain(|&key, _| key >= idx[j - 1]);
        }
        let (m, tol) = r.measure(k)?;
        let l = m.total();
        let tol = *tol;
        if j == 0 {
            out.ell0 = l;
        }
        out.area_times.push(area_at(schedule[j]));
        out.x.push(x);
        out.y.push(y);
        out.l.push(l);
        out.tolerance.push(tol);
    }
    out.refinements = r.refinements;
    out.fallback_inversions = r.ex.fallbacks.load(Ordering::Relaxed);
    out.terminated = *out.area_times.last().expect("nonempty") >= total * (1.0 - 1e-9);
    Ok(out)
}

/// Boundary-length process of a forward radial chain drawn on a disk field.
/// Area time counts the area chaos of cells whose centers are swallowed; the
/// sub-grid mass at a boundary insertion is attached to a point 1.5 eps
/// inside the disk, the one at an interior insertion is never swallowed
/// (radial chains aim at 0, the only interior insertion they allow).
pub fn extract_boundary_process(
    field: &FieldSample,
    params: &LqgParams,
    chain: &LoewnerChain,
    schedule: &[f64],
    opts: &ExtractOptions,
) -> Result<BoundaryLengthProcess> {
    if !matches!(field.grid.layout, Layout::Polar { .. }) {
        return invalid("disk extraction needs a field on a polar disk grid");
    }
    if chain.direction != Direction::Forward || chain.geometry != Geometry::Radial {
        return invalid("disk extraction needs a forward radial chain");
    }
    let eps = field.grid.eps;
    let area = area_measure(field, params.gamma)?;
    let points: Vec<AreaPoint> = area
        .atoms
        .iter()
        .map(|a| {
            let (z, tracked) = match a.id {
                AtomId::Tail(k) if field.insertions[k].boundary => (a.location * (1.0 - 1.5 * eps), true),
                AtomId::Tail(_) => (a.location, a.location.norm() > 0.0),
                _ => (a.location, true),
            };
            AreaPoint { z, mass: a.mass, at_start: false, tracked }
        })
        .collect();
    let base = |z: C64| {
        let z = if z.norm() > 1.0 { z / z.norm() } else { z };
        field.value_at(z)
    };
    let ex = Extractor {
        chain,
        base: &base,
        frame: Frame::Disk,
        gamma: params.gamma,
        q: params.q,
        opts: *opts,
        radius: opts.radius.unwrap_or(eps),
        fallbacks: AtomicUsize::new(0),
    };
    run(ex, &points, schedule)
}

/// Boundary-length process of a whole-plane chain drawn on a sphere field
/// in cylinder coordinates s + i theta = log z. The plane field is
/// h(log z) - Q log|z|; cells inside the initial hull count as swallowed at
/// the start, and L at the first schedule time is the frontier length of
/// that hull.
pub fn extract_sphere_boundary_process(
    field: &FieldSample,
    params: &LqgParams,
    chain: &LoewnerChain,
    schedule: &[f64],
    opts: &ExtractOptions,
) -> Result<BoundaryLengthProcess> {
    if !matches!(field.grid.layout, Layout::Cylinder { .. }) {
        return invalid("sphere extraction needs a field on a cylinder grid");
    }
    if chain.direction != Direction::Forward || chain.geometry != Geometry::WholePlane {
        return invalid("sphere extraction needs a whole-plane chain");
    }
    let q = params.q;
    let r_start = chain.start_time().exp();
    let area = area_measure(field, params.gamma)?;
    let points: Vec<AreaPoint> = area
        .atoms
        .iter()
        .map(|a| {
            let z = a.location.exp();
            let inside = z.norm() <= r_start * (1.0 + 1e-9);
            AreaPoint { z, mass: a.mass, at_start: inside, tracked: !inside }
        })
        .collect();
    let base = |z: C64| Ok(field.value_at(z.ln())? - q * z.norm().ln());
    let ex = Extractor {
        chain,
        base: &base,
        frame: Frame::Exterior,
        gamma: params.gamma,
        q,
        opts: *opts,
        radius: opts.radius.unwrap_or(field.grid.eps),
        fallbacks: AtomicUsize::new(0),
    };
    run(ex, &points, schedule)
}

/// Per-unit-area-time covariance pooled over increments: sums of dX^2,
/// dY^2 and dX dY divided by the summed area time. Returns
/// (var_x, var_y, corr).
pub fn pooled_covariance(increments: &[(f64, f64, f64)]) -> Result<(f64, f64, f64)> {
    let (mut sxx, mut syy, mut sxy, mut st) = (0.0, 0.0, 0.0, 0.0);
    for &(dx, dy, dt) in increments {
        if !(dt >= 0.0) {
            return invalid(format!("negative area-time increment {dt}"));
        }
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
        st += dt;
    }
    if !(st > 0.0) {
        return invalid("no area time elapsed");
    }
    Ok((sxx / st, syy / st, sxy / (sxx * syy).sqrt()))
}
