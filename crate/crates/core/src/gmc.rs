//! eps-regularized Gaussian multiplicative chaos on grids.
//!
//! Near an insertion the field blows up, so cells (arcs) within 3 eps of it
//! are replaced by one atom whose mass is the exponential functional
//! int_0^inf e^{a W_s - b s} ds = 2 / (a^2 Gamma_{2b/a^2}) of the radial
//! Brownian part below the cut radius, given the field's circle average there.

use crate::error::{invalid, Error, Result};
use crate::field::{CovarianceFactorization, FieldSample, GridDescriptor, GridSpec, Layout};
use rayon::prelude::*;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

/// Exclusion radius around insertions, in units of eps.
pub const EXCLUSION: f64 = 3.0;
const AVERAGE_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Area,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomId {
    Cell(usize),
    Arc(usize),
    /// Sub-grid mass of insertion number k.
    Tail(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub id: AtomId,
    pub location: C64,
    pub size: f64,
    pub mass: f64,
    /// Boundary parameter interval (angle on the disk, abscissa on the line).
    pub span: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosMeasure {
    pub kind: MeasureKind,
    pub atoms: Vec<Atom>,
    pub eps: f64,
    pub gamma: f64,
}

impl ChaosMeasure {
    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// CSV with columns id,x,y,size,mass.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,x,y,size,mass\n");
        for a in &self.atoms {
            let id = match a.id {
                AtomId::Cell(i) => format!("cell{i}"),
                AtomId::Arc(i) => format!("arc{i}"),
                AtomId::Tail(i) => format!("tail{i}"),
            };
            let _ = writeln!(s, "{id},{},{},{},{}", a.location.re, a.location.im, a.size, a.mass);
        }
        s
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return invalid(format!("chaos needs gamma in (0, 2), got {gamma}"));
    }
    Ok(())
}

fn q_of(gamma: f64) -> f64 {
    2.0 / gamma + gamma / 2.0
}

/// Which insertions get a sub-grid atom, validating Seiberg and gamma.
fn active_insertions(field: &FieldSample, gamma: f64) -> Result<Vec<usize>> {
    let q = q_of(gamma);
    let mut out = Vec::new();
    for (k, ins) in field.insertions.iter().enumerate() {
        if ins.alpha >= q {
            return Err(Error::Seiberg { alpha: ins.alpha, q });
        }
        if let Some(t) = ins.tails {
            if (t.gamma - gamma).abs() > 1e-12 {
                return invalid(format!("tails drawn for gamma = {}, measure requested at {gamma}", t.gamma));
            }
            out.push(k);
        }
    }
    Ok(out)
}

/// Area chaos eps^{g^2/2} e^{g h_eps} per cell, plus insertion tails.
pub fn area_measure(field: &FieldSample, gamma: f64) -> Result<ChaosMeasure> {
    check_gamma(gamma)?;
    let grid = &field.grid;
    let active = active_insertions(field, gamma)?;
    let r0 = EXCLUSION * grid.eps;
    let q = q_of(gamma);
    let mut atoms = Vec::new();
    for i in 0..grid.len() {
        let a = grid.cell_area[i];
        if a <= 0.0 {
            continue;
        }
        let z = grid.nodes[i];
        if active.iter().any(|&k| (z - field.insertions[k].location).norm() < r0) {
            continue;
        }
        let v = field.value(i);
        if !v.is_finite() {
            return Err(Error::NonFinite("field value at a cell center"));
        }
        let mass = field.scale_node(i).powf(0.5 * gamma * gamma) * (gamma * v).exp() * a;
        atoms.push(Atom { id: AtomId::Cell(i), location: z, size: a, mass, span: None });
    }
    for &k in &active {
        let ins = &field.insertions[k];
        let tails = ins.tails.expect("active insertion has tails");
        let x = field.circle_average(ins.location, r0, AVERAGE_POINTS)?;
        let scale = (gamma * x).exp() * r0.powf(gamma * q);
        let (mass, size) = if ins.boundary {
            (PI / (gamma * gamma) * scale / tails.area, 0.5 * PI * r0 * r0)
        } else {
            (TAU * 2.0 / (gamma * gamma) * scale / tails.area, PI * r0 * r0)
        };
        if !mass.is_finite() {
            return Err(Error::NonFinite("insertion tail mass"));
        }
        atoms.push(Atom { id: AtomId::Tail(k), location: ins.location, size, mass, span: None });
    }
    Ok(ChaosMeasure { kind: MeasureKind::Area, atoms, eps: grid.eps, gamma })
}

fn boundary_param(field: &FieldSample, z: C64) -> f64 {
    match field.grid.layout {
        Layout::Rect { .. } => z.re,
        _ => z.arg().rem_euclid(TAU),
    }
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Boundary chaos eps^{g^2/4} e^{g h_eps / 2} per arc, plus tails at boundary
/// insertions. `arcs` restricts to a subset of boundary positions.
pub fn boundary_measure(field: &FieldSample, gamma: f64, arcs: Option<&[usize]>) -> Result<ChaosMeasure> {
    check_gamma(gamma)?;
    let grid = &field.grid;
    if grid.boundary_nodes.is_empty() {
        return invalid("grid has no boundary");
    }
    let periodic = !matches!(grid.layout, Layout::Rect { .. });
    let active: Vec<usize> = active_insertions(field, gamma)?.into_iter().filter(|&k| field.insertions[k].boundary).collect();
    let r0 = EXCLUSION * grid.eps;
    let q = q_of(gamma);
    let nb = grid.boundary_nodes.len();
    let selected: Vec<bool> = match arcs {
        None => vec![true; nb],
        Some(list) => {
            let mut v = vec![false; nb];
            for &m in list {
                if m >= nb {
                    return invalid(format!("arc {m} out of range ({nb} arcs)"));
                }
                v[m] = true;
            }
            v
        }
    };
    let mut atoms = Vec::new();
    // tail spans: union of excluded arcs, as offsets from the insertion
    let mut spans: Vec<Option<(f64, f64)>> = vec![None; active.len()];
    for m in 0..nb {
        let i = grid.boundary_nodes[m];
        let z = grid.nodes[i];
        let len = grid.arc_length[m];
        let t = boundary_param(field, z);
        let half = if periodic { 0.5 * len } else { 0.5 * len };
        if let Some(j) = active.iter().position(|&k| (z - field.insertions[k].location).norm() < r0) {
            let c = boundary_param(field, field.insertions[active[j]].location);
            let d = if periodic { wrap(t - c) } else { t - c };
            let s = spans[j].get_or_insert((d - half, d + half));
            s.0 = s.0.min(d - half);
            s.1 = s.1.max(d + half);
            continue;
        }
        if !selected[m] {
            continue;
        }
        let v = field.value(i);
        if !v.is_finite() {
            return Err(Error::NonFinite("field value at a boundary node"));
        }
        let mass = field.scale_node(i).powf(0.25 * gamma * gamma) * (0.5 * gamma * v).exp() * len;
        atoms.push(Atom { id: AtomId::Arc(m), location: z, size: len, mass, span: Some((t - half, t + half)) });
    }
    for (j, &k) in active.iter().enumerate() {
        let ins = &field.insertions[k];
        let Some(g_len) = ins.tails.and_then(|t| t.length) else { continue };
        let c = boundary_param(field, ins.location);
        let (lo, hi) = spans[j].unwrap_or((-r0, r0));
        if let Some(list) = arcs {
            // keep the tail only if one of its arcs was requested
            let hit = list.iter().any(|&m| {
                let d = boundary_param(field, grid.nodes[grid.boundary_nodes[m]]) - c;
                let d = if periodic { wrap(d) } else { d };
                d > lo && d < hi
            });
            if !hit {
                continue;
            }
        }
        let y = field.circle_average(ins.location, r0, AVERAGE_POINTS)?;
        let mass = 8.0 / (gamma * gamma) * (0.5 * gamma * y).exp() * r0.powf(0.5 * gamma * q) / g_len;
        if !mass.is_finite() {
            return Err(Error::NonFinite("insertion tail length"));
        }
        atoms.push(Atom { id: AtomId::Tail(k), location: ins.location, size: hi - lo, mass, span: Some((c + lo, c + hi)) });
    }
    Ok(ChaosMeasure { kind: MeasureKind::Boundary, atoms, eps: grid.eps, gamma })
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// Chaos lengths of the two boundary arcs between p1 and p2: the
/// counterclockwise arc from p1 to p2 first (on the line: [p1, p2] and its
/// complement). Atoms straddling a split point are divided in proportion.
pub fn arc_split(measure: &ChaosMeasure, p1: C64, p2: C64) -> Result<(f64, f64)> {
    if measure.kind != MeasureKind::Boundary {
        return invalid("arc_split needs a boundary measure");
    }
    let on_circle = |p: C64| (p.norm() - 1.0).abs() < 1e-9;
    let on_line = |p: C64| p.im.abs() < 1e-12;
    let circle = measure.atoms.iter().all(|a| on_circle(a.location) || matches!(a.id, AtomId::Tail(_)) && on_circle(a.location));
    let (lo, hi, period) = if circle && on_circle(p1) && on_circle(p2) {
        let a = p1.arg().rem_euclid(TAU);
        let d = (p2.arg() - p1.arg()).rem_euclid(TAU);
        (a, a + d, Some(TAU))
    } else if !circle && on_line(p1) && on_line(p2) {
        (p1.re.min(p2.re), p1.re.max(p2.re), None)
    } else {
        return invalid("split points are not on the boundary");
    };
    if (p1 - p2).norm() == 0.0 {
        return invalid("split points coincide");
    }
    let (mut first, mut second) = (0.0, 0.0);
    for a in &measure.atoms {
        let span = a.span.ok_or_else(|| Error::InvalidParameter("atom without boundary span".into()))?;
        let width = span.1 - span.0;
        let inside = match period {
            Some(p) => (-1..=1).map(|k| overlap(span, (lo + k as f64 * p, hi + k as f64 * p))).sum::<f64>(),
            None => overlap(span, (lo, hi)),
        };
        let f = if width > 0.0 { (inside / width).clamp(0.0, 1.0) } else { 0.5 };
        first += f * a.mass;
        second += (1.0 - f) * a.mass;
    }
    Ok((first, second))
}

/// Expected area mass of the normalized GFF (no insertions) over the cells
/// accepted by `keep`: sum of eps^{g^2/2} e^{g^2 C(i,i)/2} |cell|.
pub fn expected_area_mass(fact: &CovarianceFactorization, grid: &GridSpec, gamma: f64, keep: impl Fn(usize) -> bool + Sync) -> Result<f64> {
    check_gamma(gamma)?;
    if !fact.matches(grid) {
        return invalid("factorization does not match grid");
    }
    let g2 = gamma * gamma;
    Ok((0..grid.len())
        .into_par_iter()
        .filter(|&i| grid.cell_area[i] > 0.0 && keep(i))
        .map(|i| grid.eps.powf(0.5 * g2) * (0.5 * g2 * fact.covariance(i, i)).exp() * grid.cell_area[i])
        .sum())
}

/// Expected boundary length of the normalized GFF: sum of
/// eps^{g^2/4} e^{g^2 C(i,i)/8} |arc|.
pub fn expected_boundary_length(fact: &CovarianceFactorization, grid: &GridSpec, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !fact.matches(grid) {
        return invalid("factorization does not match grid");
    }
    let g2 = gamma * gamma;
    Ok(grid
        .boundary_nodes
        .iter()
        .zip(&grid.arc_length)
        .map(|(&i, &len)| grid.eps.powf(0.25 * g2) * (0.125 * g2 * fact.covariance(i, i)).exp() * len)
        .sum())
}

/// Ratio of the expected total area mass at eps to that at eps/2 on the same
/// node layout. A discretization diagnostic; 1 in the continuum limit.
pub fn two_eps_ratio(grid: &GridSpec, gamma: f64) -> Result<f64> {
    let half = GridSpec::from_descriptor(&GridDescriptor { eps: 0.5 * grid.eps, ..grid.descriptor() })?;
    let full = expected_area_mass(&CovarianceFactorization::new(grid)?, grid, gamma, |_| true)?;
    let fine = expected_area_mass(&CovarianceFactorization::new(&half)?, &half, gamma, |_| true)?;
    Ok(full / fine)
}
