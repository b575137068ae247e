//! Adaptive Euler integration of the radial flow in the coordinate
//! w = log(g / U), where dw = -coth(w/2) dt - i dxi.
//!
//! The noise is additive in w, so Euler-Maruyama is strong order one. Steps
//! are coarsened to blocks of up to `max_block` grid steps far from the
//! singularity at w = 0 and split (down to Brownian-bridge sub-steps) near it.

use super::driving::DrivingPath;
use crate::error::{Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Flow {
    /// Forward radial flow, drift -coth(w/2).
    Forward,
    /// Reverse radial flow in y = log f, drift +coth(y/2).
    Reverse,
}

/// Discretization of the forward radial equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Euler-Maruyama in w = log(g/U). Every step is a conformal map fixing 0
    /// with derivative e^h there, so capacity is preserved to roundoff.
    LogCoordinates,
    /// Euler on g itself, g <- g + Phi(U, g) h. First order in the step.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub scheme: Scheme,
    pub swallow_tol: f64,
    /// Largest block, in grid steps, taken in one Euler step.
    pub max_block: usize,
    /// Maximum number of bisections below the grid step.
    pub max_depth: u32,
    /// Accept a step of length h when h <= c_drift |w|^2 ...
    pub c_drift: f64,
    /// ... and |dxi| <= c_noise |w|.
    pub c_noise: f64,
    /// Beyond this distance from the singularity every block is accepted.
    pub far_field: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { scheme: Scheme::LogCoordinates, swallow_tol: 1e-4, max_block: 32, max_depth: 40, c_drift: 0.02, c_noise: 0.15, far_field: 2.0 }
    }
}

#[inline]
pub(crate) fn coth(z: C64) -> C64 {
    if z.re >= 0.0 {
        let e = (-2.0 * z).exp();
        (1.0 + e) / (1.0 - e)
    } else {
        let e = (2.0 * z).exp();
        (e + 1.0) / (e - 1.0)
    }
}

/// 1 / (2 sinh^2(z)) evaluated without overflow.
#[inline]
pub(crate) fn half_csch2(z: C64) -> C64 {
    let e = if z.re >= 0.0 { (-2.0 * z).exp() } else { (2.0 * z).exp() };
    2.0 * e / ((1.0 - e) * (1.0 - e))
}

#[inline]
pub(crate) fn reduce_angle(mut w: C64) -> C64 {
    if w.im > PI || w.im <= -PI {
        w.im -= 2.0 * PI * ((w.im + PI) / (2.0 * PI)).floor();
        if w.im <= -PI {
            w.im += 2.0 * PI;
        }
    }
    w
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PointState {
    pub w: C64,
    /// log of dw/dz, accumulated as the exact derivative of the discrete map.
    pub logv: C64,
}

impl PointState {
    #[inline]
    fn dist(&self) -> f64 {
        self.w.norm()
    }
}

/// A piece of the time axis: a range of grid steps, or a dyadic sub-interval
/// of a single grid step.
#[derive(Debug, Clone, Copy)]
enum Span {
    Grid { a: usize, b: usize },
    Sub { k: usize, depth: u32, idx: u64, xa: f64, xb: f64 },
}

impl Span {
    /// (start time, length, driving increment, driving value at start)
    fn geometry(&self, p: &DrivingPath) -> (f64, f64, f64, f64) {
        match *self {
            Span::Grid { a, b } => (p.time(a), (b - a) as f64 * p.step, p.xi[b] - p.xi[a], p.xi[a]),
            Span::Sub { k, depth, idx, xa, xb } => {
                let h = p.step / (1u64 << depth) as f64;
                (p.time(k) + idx as f64 * h, h, xb - xa, xa)
            }
        }
    }

    fn depth(&self) -> u32 {
        match *self {
            Span::Grid { .. } => 0,
            Span::Sub { depth, .. } => depth,
        }
    }

    fn split(&self, p: &DrivingPath) -> (Span, Span) {
        match *self {
            Span::Grid { a, b } if b - a >= 2 => {
                let m = (a + b) / 2;
                (Span::Grid { a, b: m }, Span::Grid { a: m, b })
            }
            Span::Grid { a, .. } => {
                Span::Sub { k: a, depth: 0, idx: 0, xa: p.xi[a], xb: p.xi[a + 1] }.split(p)
            }
            Span::Sub { k, depth, idx, xa, xb } => {
                let h = p.step / (1u64 << depth) as f64;
                let mid = p.bridge_mid(k, depth, idx, xa, xb, h);
                (
                    Span::Sub { k, depth: depth + 1, idx: 2 * idx, xa, xb: mid },
                    Span::Sub { k, depth: depth + 1, idx: 2 * idx + 1, xa: mid, xb },
                )
            }
        }
    }
}

/// One accepted Euler step: length, driving increment, driving value at start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Step {
    pub h: f64,
    pub dxi: f64,
    pub xa: f64,
}

pub(crate) struct Integrator<'a> {
    pub path: &'a DrivingPath,
    pub flow: Flow,
    pub ctrl: StepControl,
    /// Point index reported in diagnostics.
    pub index: usize,
}

impl Integrator<'_> {
    #[inline]
    fn drift(&self, w: C64) -> (C64, C64) {
        let half = 0.5 * w;
        match self.flow {
            Flow::Forward => (-coth(half), half_csch2(half)),
            Flow::Reverse => (coth(half), -half_csch2(half)),
        }
    }

    #[inline]
    fn accept(&self, h: f64, dxi: f64, d: f64) -> bool {
        d >= self.ctrl.far_field || (h <= self.ctrl.c_drift * d * d && dxi.abs() <= self.ctrl.c_noise * d)
    }

    #[inline]
    fn euler(&self, st: &mut PointState, h: f64, dxi: f64, xa: f64) {
        if self.ctrl.scheme == Scheme::Plain && self.flow == Flow::Forward {
            let u = C64::from_polar(1.0, xa);
            let g = u * st.w.exp();
            let den = u - g;
            let phi = g * (u + g) / den;
            let dphi = (u + g) / den + 2.0 * g * u / (den * den);
            let gn = g + phi * h;
            st.logv += (g / gn).ln() + (1.0 + h * dphi).ln();
            st.w = reduce_angle((gn / u).ln() - C64::new(0.0, dxi));
            return;
        }
        let (f, df) = self.drift(st.w);
        st.logv += (1.0 + h * df).ln();
        st.w = reduce_angle(st.w + f * h - C64::new(0.0, dxi));
    }

    /// Advance from grid index `from` to `to`; returns the swallowing time if
    /// the point comes within `swallow_tol` of the singularity.
    pub fn advance(&self, st: &mut PointState, from: usize, to: usize) -> Result<Option<f64>> {
        self.advance_traced(st, from, to, &mut None)
    }

    /// As `advance`, optionally recording the accepted steps.
    pub fn advance_traced(
        &self,
        st: &mut PointState,
        from: usize,
        to: usize,
        trace: &mut Option<&mut Vec<Step>>,
    ) -> Result<Option<f64>> {
        if st.dist() < self.ctrl.swallow_tol {
            return Ok(Some(self.path.time(from)));
        }
        let mut a = from;
        while a < to {
            let b = (a + self.ctrl.max_block).min(to);
            if let Some(t) = self.span(st, Span::Grid { a, b }, trace)? {
                return Ok(Some(t));
            }
            a = b;
        }
        Ok(None)
    }

    /// Re-run a recorded step sequence; returns false if the point is swallowed.
    pub fn replay(&self, st: &mut PointState, steps: &[Step]) -> bool {
        for s in steps {
            self.euler(st, s.h, s.dxi, s.xa);
            if st.dist() < self.ctrl.swallow_tol {
                return false;
            }
        }
        true
    }

    fn span(&self, st: &mut PointState, s: Span, trace: &mut Option<&mut Vec<Step>>) -> Result<Option<f64>> {
        let (t0, h, dxi, xa) = s.geometry(self.path);
        let d = st.dist();
        if self.accept(h, dxi, d) {
            self.euler(st, h, dxi, xa);
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(Step { h, dxi, xa });
            }
            if st.dist() < self.ctrl.swallow_tol {
                return Ok(Some(t0 + h));
            }
            return Ok(None);
        }
        if s.depth() >= self.ctrl.max_depth {
            return Err(Error::StepUnderflow { index: self.index, time: t0, distance: d });
        }
        let (l, r) = s.split(self.path);
        if let Some(t) = self.span(st, l, trace)? {
            return Ok(Some(t));
        }
        self.span(st, r, trace)
    }

    /// Approximate inverse of `advance` (explicit backward Euler), from grid
    /// index `from` down to `to`. Used only to seed Newton iterations.
    pub fn retreat(&self, w: &mut C64, from: usize, to: usize) {
        let mut b = from;
        while b > to {
            let a = b.saturating_sub(self.ctrl.max_block).max(to);
            self.span_back(w, Span::Grid { a, b });
            b = a;
        }
    }

    fn span_back(&self, w: &mut C64, s: Span) {
        let (_, h, dxi, _) = s.geometry(self.path);
        let v = *w + C64::new(0.0, dxi);
        let d = v.norm().min(w.norm());
        if self.accept(h, dxi, d) || s.depth() >= self.ctrl.max_depth {
            let (f, _) = self.drift(v);
            *w = reduce_angle(v - f * h);
            return;
        }
        let (l, r) = s.split(self.path);
        self.span_back(w, r);
        self.span_back(w, l);
    }
}
