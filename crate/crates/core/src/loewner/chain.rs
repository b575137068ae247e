use super::driving::{sample_radial_driving, sample_two_sided_driving, DrivingPath};
use super::stepper::{reduce_angle, Flow, Integrator, PointState, Step, StepControl};
use crate::error::{invalid, Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    Radial,
    Chordal,
    WholePlane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoint {
    pub initial: C64,
    /// Image at each record time; `None` once swallowed.
    pub trajectory: Vec<Option<C64>>,
    pub swallowed_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub control: StepControl,
    /// Times at which trajectories are stored (rounded down to the grid).
    /// `None` stores about 200 evenly spaced grid times.
    pub record_times: Option<Vec<f64>>,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self { control: StepControl::default(), record_times: None }
    }
}

/// An immutable record of a Loewner evolution and the points it tracked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoewnerChain {
    pub driving: Arc<DrivingPath>,
    pub direction: Direction,
    pub geometry: Geometry,
    pub tracked: Vec<TrackedPoint>,
    pub record_index: Vec<usize>,
    pub control: StepControl,
}

impl LoewnerChain {
    pub fn step(&self) -> f64 {
        self.driving.step
    }

    pub fn swallow_tol(&self) -> f64 {
        self.control.swallow_tol
    }

    pub fn record_times(&self) -> Vec<f64> {
        self.record_index.iter().map(|&k| self.driving.time(k)).collect()
    }

    /// Initial time of the evolution (negative for whole-plane chains).
    pub fn start_time(&self) -> f64 {
        self.driving.t0
    }

    pub fn horizon(&self) -> f64 {
        self.driving.horizon()
    }

    /// Index of the first record time >= t.
    pub fn record_at(&self, t: f64) -> Option<usize> {
        self.record_times().iter().position(|&s| s >= t - 1e-12)
    }
}

pub(crate) fn record_indices(path: &DrivingPath, times: &Option<Vec<f64>>) -> Vec<usize> {
    let n = path.len();
    let mut idx: Vec<usize> = match times {
        Some(ts) => ts.iter().map(|&t| path.floor_index(t)).collect(),
        None => {
            let m = 200.min(n - 1).max(1);
            (0..=m).map(|j| (j * (n - 1)) / m).collect()
        }
    };
    idx.sort_unstable();
    idx.dedup();
    idx
}

fn outer_scale(geometry: Geometry, path: &DrivingPath) -> f64 {
    match geometry {
        Geometry::WholePlane => (-path.t0).exp(),
        _ => 1.0,
    }
}

fn track_point(
    path: &DrivingPath,
    flow: Flow,
    geometry: Geometry,
    ctrl: StepControl,
    records: &[usize],
    index: usize,
    z: C64,
) -> Result<TrackedPoint> {
    let mut trajectory = Vec::with_capacity(records.len());
    if z == C64::new(0.0, 0.0) && geometry == Geometry::Radial {
        trajectory.resize(records.len(), Some(z));
        return Ok(TrackedPoint { initial: z, trajectory, swallowed_at: None });
    }
    let scale = outer_scale(geometry, path);
    let lz = (z * scale).ln();
    let mut st = match flow {
        Flow::Forward => PointState { w: reduce_angle(lz - C64::new(0.0, path.xi[0])), logv: -z.ln() },
        Flow::Reverse => PointState { w: lz, logv: -z.ln() },
    };
    let integ = Integrator { path, flow, ctrl, index };
    let mut at = 0usize;
    let mut swallowed_at = None;
    for &r in records {
        if swallowed_at.is_none() {
            if let Some(t) = integ.advance(&mut st, at, r)? {
                swallowed_at = Some(t);
            }
            at = r;
        }
        trajectory.push(match swallowed_at {
            Some(_) => None,
            None => Some(image(path, flow, st.w, r)),
        });
    }
    Ok(TrackedPoint { initial: z, trajectory, swallowed_at })
}

#[inline]
fn image(path: &DrivingPath, flow: Flow, w: C64, k: usize) -> C64 {
    match flow {
        Flow::Forward => (w + C64::new(0.0, path.xi[k])).exp(),
        Flow::Reverse => w.exp(),
    }
}

fn check_disk(points: &[C64]) -> Result<()> {
    for (i, z) in points.iter().enumerate() {
        if !(z.norm() <= 1.0 + 1e-12) {
            return invalid(format!("point {i} = {z} outside the closed unit disk"));
        }
    }
    Ok(())
}

pub fn evolve_forward_radial(driving: impl Into<Arc<DrivingPath>>, points: &[C64]) -> Result<LoewnerChain> {
    evolve_forward_radial_with(driving, points, &ChainOptions::default())
}

/// g_t(z) for each point, with swallowing time the first t at which
/// |g_t(z) - U_t| drops below the tolerance (up to the log-coordinate metric).
pub fn evolve_forward_radial_with(
    driving: impl Into<Arc<DrivingPath>>,
    points: &[C64],
    opts: &ChainOptions,
) -> Result<LoewnerChain> {
    let driving = driving.into();
    check_disk(points)?;
    let records = record_indices(&driving, &opts.record_times);
    let tracked = points
        .iter()
        .enumerate()
        .map(|(i, &z)| track_point(&driving, Flow::Forward, Geometry::Radial, opts.control, &records, i, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoewnerChain {
        driving,
        direction: Direction::Forward,
        geometry: Geometry::Radial,
        tracked,
        record_index: records,
        control: opts.control,
    })
}

pub fn evolve_reverse_radial(kappa: f64, t: f64, step: f64, seed: u64, points: &[C64]) -> Result<LoewnerChain> {
    evolve_reverse_radial_with(kappa, t, step, seed, points, &ChainOptions::default())
}

/// Centered reverse radial flow f_{0,t}, integrated in y = log f as
/// dy = coth(y/2) dt - i dxi.
pub fn evolve_reverse_radial_with(
    kappa: f64,
    t: f64,
    step: f64,
    seed: u64,
    points: &[C64],
    opts: &ChainOptions,
) -> Result<LoewnerChain> {
    check_disk(points)?;
    for (i, z) in points.iter().enumerate() {
        if (z - 1.0).norm() < opts.control.swallow_tol {
            return invalid(format!("point {i} sits on the driving singularity"));
        }
    }
    let driving = Arc::new(sample_radial_driving(kappa, t, step, seed)?);
    let records = record_indices(&driving, &opts.record_times);
    let tracked = points
        .iter()
        .enumerate()
        .map(|(i, &z)| track_point(&driving, Flow::Reverse, Geometry::Radial, opts.control, &records, i, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoewnerChain {
        driving,
        direction: Direction::Reverse,
        geometry: Geometry::Radial,
        tracked,
        record_index: records,
        control: opts.control,
    })
}

pub fn simulate_whole_plane(kappa: f64, t0: f64, t: f64, step: f64, seed: u64, points: &[C64]) -> Result<LoewnerChain> {
    simulate_whole_plane_with(kappa, t0, t, step, seed, points, &ChainOptions::default())
}

/// Whole-plane evolution truncated at capacity time -t0, started from the
/// disk of radius e^{-t0}; points still unswallowed at t are censored.
pub fn simulate_whole_plane_with(
    kappa: f64,
    t0: f64,
    t: f64,
    step: f64,
    seed: u64,
    points: &[C64],
    opts: &ChainOptions,
) -> Result<LoewnerChain> {
    if !(t0 > 0.0) {
        return invalid("truncation depth T0 must be positive");
    }
    for (i, z) in points.iter().enumerate() {
        if !(z.norm() > 0.0 && z.norm().is_finite()) {
            return invalid(format!("point {i} must be nonzero and finite"));
        }
    }
    let driving = Arc::new(sample_two_sided_driving(kappa, t0, t, step, seed)?);
    let records = record_indices(&driving, &opts.record_times);
    let tracked = points
        .iter()
        .enumerate()
        .map(|(i, &z)| track_point(&driving, Flow::Forward, Geometry::WholePlane, opts.control, &records, i, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoewnerChain {
        driving,
        direction: Direction::Forward,
        geometry: Geometry::WholePlane,
        tracked,
        record_index: records,
        control: opts.control,
    })
}

/// Value and derivative of the forward map at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapValue {
    pub value: C64,
    pub derivative: C64,
}

fn forward_chain(chain: &LoewnerChain) -> Result<()> {
    if chain.direction != Direction::Forward || chain.geometry == Geometry::Chordal {
        return invalid("operation needs a forward radial or whole-plane chain");
    }
    Ok(())
}

fn initial_state(chain: &LoewnerChain, z: C64) -> PointState {
    let path = &*chain.driving;
    let scale = outer_scale(chain.geometry, path);
    PointState { w: reduce_angle((z * scale).ln() - C64::new(0.0, path.xi[0])), logv: -z.ln() }
}

fn map_value(chain: &LoewnerChain, k: usize, st: &PointState) -> MapValue {
    let value = image(&chain.driving, Flow::Forward, st.w, k);
    MapValue { value, derivative: value * st.logv.exp() }
}

/// g_t(z) and g_t'(z) at grid index k, by re-integrating the point.
pub fn forward_map(chain: &LoewnerChain, k: usize, z: C64) -> Result<MapValue> {
    forward_traced(chain, chain.control, k, z, None)
}

fn forward_traced(chain: &LoewnerChain, ctrl: StepControl, k: usize, z: C64, trace: Option<&mut Vec<Step>>) -> Result<MapValue> {
    forward_chain(chain)?;
    let path = &*chain.driving;
    if k >= path.len() {
        return Err(Error::OutsideHorizon(path.time(k)));
    }
    if chain.geometry == Geometry::Radial && z == C64::new(0.0, 0.0) {
        return Ok(MapValue { value: z, derivative: C64::new((path.time(k) - path.t0).exp(), 0.0) });
    }
    let mut st = initial_state(chain, z);
    let integ = Integrator { path, flow: Flow::Forward, ctrl, index: 0 };
    let mut trace = trace;
    if integ.advance_traced(&mut st, 0, k, &mut trace)?.is_some() {
        return Err(Error::InHull(0));
    }
    Ok(map_value(chain, k, &st))
}

pub fn invert_chain_at(chain: &LoewnerChain, t: f64, w: C64) -> Result<C64> {
    invert_with_derivative(chain, t, w, 1e-9).map(|(z, _)| z)
}

/// z with |g_t(z) - w| < tol, together with (g_t^{-1})'(w).
///
/// Seeded by integrating the flow backwards from w, then polished by Newton
/// iterations on the discrete forward map. The adaptive step partition makes
/// that map piecewise smooth, so Newton runs with the partition frozen at the
/// current iterate and the partition is refreshed until it is self-consistent.
/// When the target falls in a jump of the adaptive map (each partition's
/// solution selects the other partition), the exact preimage under the last
/// frozen partition is returned.
pub fn invert_with_derivative(chain: &LoewnerChain, t: f64, w: C64, tol: f64) -> Result<(C64, C64)> {
    invert_within(chain, t, w, tol, tol).map(|(z, d, _)| (z, d))
}

/// As `invert_with_derivative`, but when no iterate reaches `tol` the best
/// one found is accepted if its residual is below `accept`. Returns the
/// residual as well (0 when the frozen-partition solution was used).
pub fn invert_within(chain: &LoewnerChain, t: f64, w: C64, tol: f64, accept: f64) -> Result<(C64, C64, f64)> {
    forward_chain(chain)?;
    let path = &*chain.driving;
    let k = path.index_of(t).ok_or(Error::OutsideHorizon(t))?;
    let scale = outer_scale(chain.geometry, path);
    if k == 0 {
        return Ok((w / scale, C64::new(1.0 / scale, 0.0), 0.0));
    }
    if chain.geometry == Geometry::Radial && w == C64::new(0.0, 0.0) {
        return Ok((w, C64::new((-t).exp(), 0.0), 0.0));
    }
    let mut best = Best::default();
    // points in deep fjords of the hull pass close to the singularity on
    // the way out; retry with a finer swallowing threshold
    let fine = StepControl { swallow_tol: 1e-7, max_depth: 56, ..chain.control };
    for ctrl in [chain.control, fine] {
        if let Some(s) = invert_attempt(chain, ctrl, k, w, tol, scale, &mut best)? {
            return Ok(s);
        }
        if best.0.is_some_and(|b| b.0 < accept) {
            break;
        }
    }
    match best.0 {
        Some((res, z, d)) if res < accept => Ok((z, d, res)),
        Some((res, _, _)) => Err(Error::InversionFailed { residual: res }),
        None => Err(Error::InversionFailed { residual: f64::INFINITY }),
    }
}

fn invert_attempt(chain: &LoewnerChain, ctrl: StepControl, k: usize, w: C64, tol: f64, scale: f64, best: &mut Best) -> Result<Option<(C64, C64, f64)>> {
    let seed = retreat_seed(chain, k, w, scale);
    if let Some(s) = invert_seeded(chain, ctrl, k, w, tol, seed, best)? {
        return Ok(Some(s));
    }
    // continuation from points deeper inside the domain
    let toward = |lam: f64| if chain.geometry == Geometry::Radial { lam * w } else { w / lam };
    let mut z = retreat_seed(chain, k, toward(0.9), scale);
    for lam in [0.9, 0.95, 0.98, 0.99, 0.995, 0.998] {
        match invert_seeded(chain, ctrl, k, toward(lam), tol, z, &mut Best::default())? {
            Some((zz, _, _)) => z = zz,
            None => break,
        }
    }
    invert_seeded(chain, ctrl, k, w, tol, z, best)
}

/// Approximate g_t^{-1}(w) and its derivative by integrating the flow
/// backwards from w (derivative by central differences). Always defined, but
/// only first-order accurate; a fallback when `invert_within` fails.
pub fn retreat_map(chain: &LoewnerChain, t: f64, w: C64) -> Result<(C64, C64)> {
    forward_chain(chain)?;
    let path = &*chain.driving;
    let k = path.index_of(t).ok_or(Error::OutsideHorizon(t))?;
    let scale = outer_scale(chain.geometry, path);
    let z = retreat_seed(chain, k, w, scale);
    let h = 1e-7 * w.norm().max(1e-3);
    let dx = (retreat_seed(chain, k, w + h, scale) - retreat_seed(chain, k, w - h, scale)) / (2.0 * h);
    let dy = (retreat_seed(chain, k, w + C64::new(0.0, h), scale) - retreat_seed(chain, k, w - C64::new(0.0, h), scale)) / (2.0 * h);
    // complex derivative: average of the two directional estimates
    let d = 0.5 * (dx - C64::new(0.0, 1.0) * dy);
    if !(z.re.is_finite() && z.im.is_finite() && d.norm().is_finite()) {
        return Err(Error::NonFinite("backward flow"));
    }
    Ok((z, d))
}

/// Smallest-residual iterate seen: (residual, z, (g^{-1})').
#[derive(Default)]
struct Best(Option<(f64, C64, C64)>);

impl Best {
    fn offer(&mut self, res: f64, z: C64, deriv: C64) {
        if res.is_finite() && self.0.is_none_or(|b| res < b.0) {
            self.0 = Some((res, z, 1.0 / deriv));
        }
    }
}

fn retreat_seed(chain: &LoewnerChain, k: usize, w: C64, scale: f64) -> C64 {
    let path = &*chain.driving;
    let integ = Integrator { path, flow: Flow::Forward, ctrl: chain.control, index: 0 };
    let mut v = reduce_angle(w.ln() - C64::new(0.0, path.xi[k]));
    integ.retreat(&mut v, k, 0);
    (v + C64::new(0.0, path.xi[0])).exp() / scale
}

#[allow(clippy::too_many_arguments)]
fn invert_seeded(chain: &LoewnerChain, ctrl: StepControl, k: usize, w: C64, tol: f64, seed: C64, best: &mut Best) -> Result<Option<(C64, C64, f64)>> {
    let path = &*chain.driving;
    let integ = Integrator { path, flow: Flow::Forward, ctrl, index: 0 };
    let mut z = seed;
    let mut steps = Vec::new();
    let mut frozen = None;
    for _ in 0..6 {
        steps.clear();
        let m = match forward_traced(chain, ctrl, k, z, Some(&mut steps)) {
            Ok(m) => m,
            Err(Error::InHull(_)) | Err(Error::StepUnderflow { .. }) => {
                // pull the iterate away from the hull, towards the target's preimage scale
                z *= 0.999;
                continue;
            }
            Err(e) => return Err(e),
        };
        let res = (m.value - w).norm();
        best.offer(res, z, m.derivative);
        if res < tol {
            return Ok(Some((z, 1.0 / m.derivative, res)));
        }
        // Newton on the frozen partition
        let mut zn = z;
        let mut mv = m;
        for _ in 0..20 {
            let prev = zn;
            zn -= (mv.value - w) / mv.derivative;
            if chain.geometry == Geometry::Radial && zn.norm() >= 1.0 {
                zn = 0.5 * (zn / zn.norm() + prev);
            }
            let mut st = initial_state(chain, zn);
            if !integ.replay(&mut st, &steps) {
                zn = 0.5 * (zn + prev);
                continue;
            }
            mv = map_value(chain, k, &st);
            best.offer((mv.value - w).norm(), zn, mv.derivative);
            if (mv.value - w).norm() < 0.1 * tol {
                frozen = Some((zn, 1.0 / mv.derivative, 0.0));
                break;
            }
        }
        z = zn;
    }
    Ok(frozen)
}

/// Carry a boundary point, given by its angle phi in the centered frame
/// g/U at grid index `from`, to grid index `to`. Returns the new angle in
/// (-pi, pi], or None if the point is swallowed on the way.
pub fn flow_boundary_angle(chain: &LoewnerChain, from: usize, to: usize, phi: f64) -> Result<Option<f64>> {
    forward_chain(chain)?;
    let path = &*chain.driving;
    if from > to || to >= path.len() {
        return Err(Error::OutsideHorizon(path.time(to.min(path.len() - 1))));
    }
    let integ = Integrator { path, flow: Flow::Forward, ctrl: chain.control, index: 0 };
    let mut st = PointState { w: reduce_angle(C64::new(0.0, phi)), logv: C64::new(0.0, 0.0) };
    if st.w.norm() < chain.control.swallow_tol {
        return Ok(None);
    }
    Ok(match integ.advance(&mut st, from, to)? {
        Some(_) => None,
        None => Some(st.w.im),
    })
}

/// A chain on the same driving function tracking a new set of points.
pub fn retrack(chain: &LoewnerChain, points: &[C64], record_times: Option<Vec<f64>>) -> Result<LoewnerChain> {
    forward_chain(chain)?;
    if chain.geometry == Geometry::Radial {
        check_disk(points)?;
    }
    let records = record_indices(&chain.driving, &record_times);
    let tracked = points
        .iter()
        .enumerate()
        .map(|(i, &z)| track_point(&chain.driving, Flow::Forward, chain.geometry, chain.control, &records, i, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoewnerChain {
        driving: chain.driving.clone(),
        direction: chain.direction,
        geometry: chain.geometry,
        tracked,
        record_index: records,
        control: chain.control,
    })
}

/// n points on the circle of radius r about 0.
pub fn probe_circle(r: f64, n: usize) -> Vec<C64> {
    (0..n).map(|j| C64::from_polar(r, std::f64::consts::TAU * j as f64 / n as f64)).collect()
}

/// log|f'(0)| at each record time, from tracked points on a circle about 0
/// (mean-value property of log|f(z)/z|). `probes` indexes those points.
pub fn log_derivative_at_zero(chain: &LoewnerChain, probes: std::ops::Range<usize>) -> Vec<Option<f64>> {
    let n = probes.len() as f64;
    (0..chain.record_index.len())
        .map(|j| {
            let mut s = 0.0;
            for p in &chain.tracked[probes.clone()] {
                let g = p.trajectory[j]?;
                s += g.norm().ln() - p.initial.norm().ln();
            }
            Some(s / n)
        })
        .collect()
}
