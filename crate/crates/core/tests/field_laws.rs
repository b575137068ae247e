use slelab_core::field::{
    girsanov_reweight, projected_kernel, sample_gff, sample_lf_disk, CovarianceFactorization, FieldSample, GridSpec,
};
use slelab_core::{LqgParams, C64};
use std::sync::Arc;

fn small_grid() -> (Arc<GridSpec>, CovarianceFactorization) {
    let g = Arc::new(GridSpec::polar_disk(16, 32, 0.03).unwrap());
    let f = CovarianceFactorization::new(&g).unwrap();
    (g, f)
}

fn node(ring: usize, angle: usize) -> usize {
    ring * 32 + angle
}

/// Weighted mean and its delta-method standard error.
fn weighted_mean_se(x: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let m = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let v = x.iter().zip(w).map(|(a, b)| (b * (a - m)).powi(2)).sum::<f64>() / (sw * sw);
    (m, v.sqrt())
}

#[test]
fn gff_covariance_of_separated_nodes() {
    let (g, f) = small_grid();
    let (i, j) = (node(4, 0), node(10, 16));
    let n = 4000;
    let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for seed in 0..n as u64 {
        let s = sample_gff(g.clone(), &f, seed).unwrap();
        xs.push(s.value(i));
        ys.push(s.value(j));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1) as f64;
    let vx = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / (n - 1) as f64;
    let vy = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / (n - 1) as f64;
    let oracle = projected_kernel(&g, i, j).unwrap();
    let se = ((vx * vy + oracle * oracle) / n as f64).sqrt();
    assert!((cov - oracle).abs() < 3.0 * se, "cov {cov} oracle {oracle} se {se}");
    // pairing against a fixed test vector has mean zero
    let pair: Vec<f64> = (0..400u64)
        .map(|seed| {
            let s = sample_gff(g.clone(), &f, 10_000 + seed).unwrap();
            (0..g.len()).map(|k| g.cell_area[k] * g.nodes[k].re * s.value(k)).sum::<f64>()
        })
        .collect();
    let pm = pair.iter().sum::<f64>() / pair.len() as f64;
    let psd = (pair.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (pair.len() - 1) as f64).sqrt();
    assert!(pm.abs() < 4.0 * psd / (pair.len() as f64).sqrt(), "pairing mean {pm}");
}

#[test]
fn girsanov_shift_matches_ring_covariance() {
    let (g, f) = small_grid();
    let p = LqgParams::from_gamma(1.0).unwrap();
    let (a1, a2) = (0.2, 0.6);
    let eps = 0.03;
    let w = node(8, 5);
    let n = 6000;
    let samples: Vec<FieldSample> =
        (0..n as u64).map(|s| sample_lf_disk(&p, &[(a1, C64::new(0.0, 0.0), false)], g.clone(), &f, s).unwrap()).collect();
    let tilted = girsanov_reweight(&samples, a1, a2, eps).unwrap();
    let x: Vec<f64> = samples.iter().map(|s| s.value(w)).collect();
    let plain: Vec<f64> = vec![1.0; n];
    let wt: Vec<f64> = tilted.iter().map(|s| s.weight).collect();
    let (m0, se0) = weighted_mean_se(&x, &plain);
    let (m1, se1) = weighted_mean_se(&x, &wt);
    let (_, ring) = g.ring_nearest(eps).unwrap();
    let oracle = (a2 - a1) * ring.iter().map(|&r| projected_kernel(&g, w, r).unwrap()).sum::<f64>() / ring.len() as f64;
    let shift = m1 - m0;
    let se = (se0 * se0 + se1 * se1).sqrt();
    assert!((shift - oracle).abs() < 5.0 * se, "shift {shift} oracle {oracle} se {se}");
    // the ring covariance is the Green function at the separated node
    let green = (a2 - a1) * -g.nodes[w].norm().ln();
    assert!((oracle - green).abs() < 0.05 * green.abs(), "{oracle} vs {green}");
}

#[test]
fn chaos_weighting_shifts_mean_by_covariance() {
    let (g, f) = small_grid();
    let gamma = 0.5;
    let z0 = node(6, 3);
    let probes = [node(6, 4), node(3, 10), node(12, 20)];
    let n = 6000;
    let samples: Vec<FieldSample> = (0..n as u64).map(|s| sample_gff(g.clone(), &f, 50_000 + s).unwrap()).collect();
    let w: Vec<f64> = samples.iter().map(|s| (gamma * s.value(z0)).exp()).collect();
    let ones = vec![1.0; n];
    for &x in &probes {
        let v: Vec<f64> = samples.iter().map(|s| s.value(x)).collect();
        let (m0, se0) = weighted_mean_se(&v, &ones);
        let (m1, se1) = weighted_mean_se(&v, &w);
        let oracle = gamma * projected_kernel(&g, x, z0).unwrap();
        let se = (se0 * se0 + se1 * se1).sqrt();
        assert!((m1 - m0 - oracle).abs() < 5.0 * se, "node {x}: shift {} oracle {oracle} se {se}", m1 - m0);
    }
}
