use slelab_core::field::{projected_kernel, sample_gff, CovarianceFactorization, GridSpec};
use slelab_core::gmc::{area_measure, boundary_measure, expected_area_mass, expected_boundary_length, two_eps_ratio, AtomId};
use std::sync::Arc;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn expected_masses_match_monte_carlo() {
    let g = Arc::new(GridSpec::polar_disk(16, 32, 0.03).unwrap());
    let f = CovarianceFactorization::new(&g).unwrap();
    let gamma = 0.8;
    let in_region = |i: usize| (2..10).contains(&(i / 32));
    let oracle_area: f64 = (0..g.len())
        .filter(|&i| g.cell_area[i] > 0.0 && in_region(i))
        .map(|i| g.eps.powf(0.5 * gamma * gamma) * (0.5 * gamma * gamma * projected_kernel(&g, i, i).unwrap()).exp() * g.cell_area[i])
        .sum();
    let oracle_len: f64 = g
        .boundary_nodes
        .iter()
        .zip(&g.arc_length)
        .map(|(&i, &l)| g.eps.powf(0.25 * gamma * gamma) * (0.125 * gamma * gamma * projected_kernel(&g, i, i).unwrap()).exp() * l)
        .sum();
    let closed = expected_area_mass(&f, &g, gamma, in_region).unwrap();
    assert!((closed - oracle_area).abs() < 1e-9 * oracle_area, "{closed} vs {oracle_area}");
    let closed_len = expected_boundary_length(&f, &g, gamma).unwrap();
    assert!((closed_len - oracle_len).abs() < 1e-9 * oracle_len);

    let n = 3000;
    let (mut area, mut len) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for seed in 0..n as u64 {
        let s = sample_gff(g.clone(), &f, seed).unwrap();
        let a = area_measure(&s, gamma).unwrap();
        area.push(a.atoms.iter().filter(|x| matches!(x.id, AtomId::Cell(i) if in_region(i))).map(|x| x.mass).sum::<f64>());
        len.push(boundary_measure(&s, gamma, None).unwrap().total());
    }
    let (ma, sa) = mean_se(&area);
    let (ml, sl) = mean_se(&len);
    assert!((ma - oracle_area).abs() < 3.0 * sa, "area {ma} oracle {oracle_area} se {sa}");
    assert!((ml - oracle_len).abs() < 3.0 * sl, "length {ml} oracle {oracle_len} se {sl}");
}

#[test]
fn two_eps_consistency_on_default_grid() {
    let r = two_eps_ratio(&GridSpec::disk_default(), 1.0).unwrap();
    assert!((r - 1.0).abs() < 0.1, "ratio {r}");
}
