use slelab_core::loewner::{evolve_forward_radial, sample_radial_driving, simulate_whole_plane};
use slelab_core::stats::{proportion_half_width, two_proportion};
use slelab_core::C64;

const KAPPA: f64 = 10.0;
const STEP: f64 = 1e-3;
const HORIZON: f64 = 10.0;

/// Swallowing times of `pts` under whole-plane SLE, or None if any is censored.
fn whole_plane_times(t0: f64, seed: u64, pts: &[C64]) -> Option<Vec<f64>> {
    let c = simulate_whole_plane(KAPPA, t0, HORIZON, STEP, seed, pts).unwrap();
    c.tracked.iter().map(|p| p.swallowed_at).collect()
}

#[test]
fn swallowing_time_under_refinement() {
    let pts: Vec<C64> = (0..8).map(|j| C64::from_polar(0.3 + 0.08 * j as f64, 0.9 * j as f64)).collect();
    let (mut compared, mut earlier) = (0, 0);
    for seed in 0..40 {
        let d = sample_radial_driving(6.0, 3.0, 2e-3, seed).unwrap();
        let coarse = evolve_forward_radial(d.clone(), &pts).unwrap();
        let fine = evolve_forward_radial(d.refine(), &pts).unwrap();
        for (a, b) in coarse.tracked.iter().zip(&fine.tracked) {
            if let (Some(ta), Some(tb)) = (a.swallowed_at, b.swallowed_at) {
                compared += 1;
                // one coarse step of slack for the detection grid
                if tb < ta - d.step {
                    earlier += 1;
                }
            }
        }
    }
    assert!(compared > 100, "only {compared} points swallowed at both steps");
    assert!(earlier * 50 <= compared, "{earlier} of {compared} swallowed earlier after refinement");
}

#[test]
fn whole_plane_conjugation_symmetry() {
    let pts = [C64::new(0.3, 0.4), C64::new(0.3, -0.4)];
    let (mut k, mut n) = (0u64, 0u64);
    for seed in 0..2000 {
        if let Some(t) = whole_plane_times(6.0, seed, &pts) {
            n += 1;
            k += (t[0] < t[1]) as u64;
        }
    }
    assert!(n >= 1980, "{} censored", 2000 - n);
    let p = k as f64 / n as f64;
    assert!((p - 0.5).abs() <= proportion_half_width(0.5, n, 0.01), "p = {p} over {n}");
}

fn order_code(t: &[f64]) -> [bool; 3] {
    [t[0] < t[1], t[0] < t[2], t[1] < t[2]]
}

#[test]
fn whole_plane_rotation_invariance() {
    let base = [C64::new(1.0, 0.0), C64::new(0.0, 2.0), C64::new(-0.5, -0.5)];
    let rot = C64::from_polar(1.0, 1.1);
    let rotated: Vec<C64> = base.iter().map(|z| rot * z).collect();
    let n = 2000;
    let mut counts = [[0u64; 3]; 2];
    let mut totals = [0u64; 2];
    for seed in 0..n {
        for (arm, pts) in [base.to_vec(), rotated.clone()].iter().enumerate() {
            // independent seeds per arm
            if let Some(t) = whole_plane_times(6.0, 2 * seed + arm as u64 + 10_000, pts) {
                totals[arm] += 1;
                for (c, b) in counts[arm].iter_mut().zip(order_code(&t)) {
                    *c += b as u64;
                }
            }
        }
    }
    for j in 0..3 {
        let r = two_proportion("rotation", counts[0][j], totals[0], counts[1][j], totals[1], 0.01 / 3.0).unwrap();
        assert!(r.passed(), "pair {j}: {r:?}");
    }
}

#[test]
fn whole_plane_truncation_doubling() {
    let pts = [C64::new(1.0, 0.0), C64::new(0.0, 2.0)];
    let n = 2000;
    let mut est = Vec::new();
    for t0 in [6.0, 12.0] {
        let (mut k, mut m) = (0u64, 0u64);
        for seed in 0..n {
            if let Some(t) = whole_plane_times(t0, 20_000 + seed, &pts) {
                m += 1;
                k += (t[0] < t[1]) as u64;
            }
        }
        est.push((k as f64 / m as f64, m));
    }
    let hw = proportion_half_width(est[0].0, est[0].1, 0.01);
    assert!((est[0].0 - est[1].0).abs() < hw, "{est:?}, half-width {hw}");
}
