//! Centered reverse chordal SLE_kappa(rho) with an interior force point.

use super::chain::{record_indices, ChainOptions, Direction, Geometry, LoewnerChain, TrackedPoint};
use super::driving::{sample_radial_driving, DrivingKind, DrivingPath};
use crate::error::{invalid, Error, Result};
use crate::C64;
use std::sync::Arc;

/// Runs the pair
///   dW = sqrt(kappa) dB + Re(rho / (W - g(z0))) ds,   dg(z) = -2 / (g(z) - W) ds
/// and returns a chain whose first tracked point is the force point z0; all
/// trajectories are centered, i.e. record g_s(z) - W_s.
pub fn evolve_reverse_chordal_rho(kappa: f64, rho: f64, z0: C64, t: f64, step: f64, seed: u64) -> Result<LoewnerChain> {
    evolve_reverse_chordal_rho_with(kappa, rho, z0, t, step, seed, &[], &ChainOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn evolve_reverse_chordal_rho_with(
    kappa: f64,
    rho: f64,
    z0: C64,
    t: f64,
    step: f64,
    seed: u64,
    extra: &[C64],
    opts: &ChainOptions,
) -> Result<LoewnerChain> {
    if !(z0.im > 0.0) {
        return invalid("force point must lie in the upper half-plane");
    }
    if extra.iter().any(|z| !(z.im > 0.0)) {
        return invalid("tracked points must lie in the upper half-plane");
    }
    // sqrt(kappa) B on the grid, refined by the same keyed bridges as radial paths
    let bm = sample_radial_driving(kappa, t, step, seed)?;
    let n = bm.len();
    let records = record_indices(&bm, &opts.record_times);
    let tol = opts.control.swallow_tol;

    let mut zs: Vec<C64> = std::iter::once(z0).chain(extra.iter().copied()).collect();
    let mut w = 0.0;
    let mut wpath = Vec::with_capacity(n);
    wpath.push(0.0);
    let mut traj: Vec<Vec<Option<C64>>> = vec![Vec::with_capacity(records.len()); zs.len()];
    let mut next_rec = 0;
    let push_records = |k: usize, zs: &[C64], traj: &mut Vec<Vec<Option<C64>>>, next_rec: &mut usize| {
        while *next_rec < records.len() && records[*next_rec] == k {
            for (tr, z) in traj.iter_mut().zip(zs) {
                tr.push(Some(*z));
            }
            *next_rec += 1;
        }
    };
    push_records(0, &zs, &mut traj, &mut next_rec);
    for k in 0..n - 1 {
        let zf = zs[0].norm();
        let mut depth = 0u32;
        while bm.step / (1u64 << depth) as f64 > 0.01 * zf * zf && depth < opts.control.max_depth {
            depth += 1;
        }
        let h = bm.step / (1u64 << depth) as f64;
        let incs = if depth == 0 { vec![bm.xi[k + 1] - bm.xi[k]] } else { bm.sub_increments(k, depth) };
        for db in incs {
            let drift = (rho / zs[0]).re;
            let dw = db - drift * h;
            for z in zs.iter_mut() {
                *z += -2.0 * h / *z - dw;
            }
            w += dw;
            if zs[0].im < tol {
                return Err(Error::Diagnostic(format!(
                    "force point reached the real line at s = {:.6}; step too coarse",
                    bm.time(k)
                )));
            }
        }
        wpath.push(w);
        push_records(k + 1, &zs, &mut traj, &mut next_rec);
    }
    let initial: Vec<C64> = std::iter::once(z0).chain(extra.iter().copied()).collect();
    let tracked = initial
        .into_iter()
        .zip(traj)
        .map(|(z, trajectory)| TrackedPoint { initial: z, trajectory, swallowed_at: None })
        .collect();
    let driving = DrivingPath { t0: 0.0, step: bm.step, xi: wpath, kappa, seed, kind: DrivingKind::Chordal, level: 0 };
    Ok(LoewnerChain {
        driving: Arc::new(driving),
        direction: Direction::Reverse,
        geometry: Geometry::Chordal,
        tracked,
        record_index: records,
        control: opts.control,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_time_is_identity() {
        let z0 = C64::new(0.3, 1.0);
        let c = evolve_reverse_chordal_rho(6.0, 12.0, z0, 0.0, 1e-3, 1).unwrap();
        assert_eq!(c.driving.xi[0], 0.0);
        assert_eq!(c.tracked[0].trajectory[0], Some(z0));
    }

    #[test]
    fn force_point_imaginary_part_non_decreasing() {
        let c = evolve_reverse_chordal_rho(6.0, 12.0, C64::new(0.0, 0.5), 1.0, 1e-3, 2).unwrap();
        let ims: Vec<f64> = c.tracked[0].trajectory.iter().map(|z| z.unwrap().im).collect();
        assert!(ims.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn hydrodynamic_coefficient() {
        let t = 0.5;
        let ys = [1e3, 2e3];
        let extra: Vec<C64> = ys.iter().map(|&y| C64::new(0.0, y)).collect();
        let opts = ChainOptions { record_times: Some(vec![t]), ..Default::default() };
        let c = evolve_reverse_chordal_rho_with(6.0, 12.0, C64::new(0.0, 1.0), t, 1e-3, 3, &extra, &opts).unwrap();
        // f(iy) - iy = c0 + c1/(iy): solve from the two radii
        let f: Vec<C64> = (0..2).map(|j| c.tracked[j + 1].trajectory.last().unwrap().unwrap() - extra[j]).collect();
        let inv: Vec<C64> = extra.iter().map(|z| 1.0 / z).collect();
        let c1 = (f[0] - f[1]) / (inv[0] - inv[1]);
        assert_relative_eq!(c1.re, -2.0 * t, max_relative = 1e-2);
    }
}
