use super::{mating, par_samples, within, Ctx, Outcome};
use crate::svg::{Plot, Series, Style};
use slelab_core::field::{girsanov_reweight, sample_lf_disk, sample_lf_disk_fixed_length, CovarianceFactorization, GridSpec};
use slelab_core::gmc::area_measure;
use slelab_core::loewner::{evolve_forward_radial, sample_radial_driving};
use slelab_core::mot::{extract_boundary_process, pooled_covariance, ExtractOptions, InverseGamma};
use slelab_core::rng::derive_seed;
use slelab_core::stats::{weighted_ks, TestReport};
use slelab_core::{Error, Result, C64};
use std::fmt::Write as _;
use std::sync::Arc;

fn disk_grid(ctx: &Ctx, rings: usize, angles: usize) -> Result<(Arc<GridSpec>, CovarianceFactorization)> {
    let (r, a, eps) = ctx.grid(rings, angles);
    let g = Arc::new(GridSpec::polar_disk(r, a, eps)?);
    let f = CovarianceFactorization::new(&g)?;
    Ok((g, f))
}

/// Weighted mean and its delta-method standard error.
fn weighted_mean_se(x: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let m = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let v = x.iter().zip(w).map(|(a, b)| (b * (a - m)).powi(2)).sum::<f64>() / (sw * sw);
    (m, v.sqrt())
}

pub fn girsanov_exactness(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params;
    let (g, f) = disk_grid(ctx, 128, 128)?;
    let n = ctx.samples(10_000);
    let (a1, a2) = (p.q + p.gamma / 4.0, p.q - p.gamma / 4.0);
    let slelab_core::field::Layout::Polar { rings, angles } = g.layout else { unreachable!() };
    // eight probes from radius ~0.1 to ~0.8, spread in angle
    let probes: Vec<usize> = (0..8)
        .map(|j| {
            let ring = ((0.1 + 0.1 * j as f64) * rings as f64).round() as usize;
            ring.min(rings - 1) * angles + (j * angles / 8 + j) % angles
        })
        .collect();
    if let Some(&i) = probes.iter().find(|&&i| g.nodes[i].norm() <= 3.0 * g.eps) {
        return Err(Error::InvalidParameter(format!("probe {} within 3 eps of the insertion", g.nodes[i])));
    }
    let eps = g.eps;
    let draws = par_samples(n, |s| {
        let h = sample_lf_disk(&p, &[(a1, C64::new(0.0, 0.0), false)], g.clone(), &f, derive_seed(ctx.seed(), s))?;
        let w = girsanov_reweight(std::slice::from_ref(&h), a1, a2, eps)?[0].weight;
        // the alpha1 insertion is deterministic; the shift lives in the Gaussian part
        Ok((w, probes.iter().map(|&i| h.value(i) - h.deterministic(i) - h.constant).collect::<Vec<_>>()))
    })?;
    let w: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let ess = slelab_core::stats::effective_sample_size(&w);
    let mut out = Outcome::default();
    let mut csv = String::from("node,re,im,shift,se,oracle\n");
    let mut pts = Vec::new();
    for (j, &i) in probes.iter().enumerate() {
        let x: Vec<f64> = draws.iter().map(|d| d.1[j]).collect();
        let (m, se) = weighted_mean_se(&x, &w);
        let z = g.nodes[i];
        let oracle = -(a2 - a1) * z.norm().ln();
        out.reports.push(
            TestReport::new(format!("weighted shift at |w| = {:.3}", z.norm()), (m - oracle).abs() / se, 5.0, 0.0, n as u64)
                .with("test", "standard-errors")
                .with("shift", m)
                .with("oracle", oracle)
                .with("se", se),
        );
        let _ = writeln!(csv, "{i},{},{},{m},{se},{oracle}", z.re, z.im);
        pts.push((z.norm(), m, oracle));
    }
    out.put("alpha1", a1);
    out.put("alpha2", a2);
    out.put("effective_sample_size", ess);
    out.put("probes", probes.iter().map(|&i| (g.nodes[i].re, g.nodes[i].im)).collect::<Vec<_>>());
    out.tables.push(("probe_shifts".into(), csv));
    let mut oracle_curve: Vec<(f64, f64)> = (1..=90).map(|k| 0.01 * k as f64).map(|r| (r, -(a2 - a1) * f64::ln(r))).collect();
    oracle_curve.retain(|q| q.0 > 0.05);
    out.plots.push(
        Plot::new("probe_shifts", "weighted mean shift vs Green function", "|w|", "shift")
            .with(Series::new("(a2 - a1) G(w, 0)", oracle_curve, Style::Line))
            .with(Series::new("estimate", pts.iter().map(|q| (q.0, q.1)).collect(), Style::Points)),
    );
    Ok(out)
}

pub fn area_law(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params;
    let n = ctx.samples(5000);
    let level = ctx.level();
    // the scale comes from the first-passage run
    let adj = mating::adjudicate(&p, 100_000, 1e-4, derive_seed(ctx.seed(), 7), level)?;
    let (g, f) = disk_grid(ctx, 256, 256)?;
    let (alpha, beta) = (p.q - p.gamma / 4.0, 1.5 * p.gamma);
    let draws = par_samples(n, |s| {
        let h = sample_lf_disk_fixed_length(&p, alpha, beta, 1.0, g.clone(), &f, derive_seed(ctx.seed(), s))?;
        Ok((area_measure(&h, p.gamma)?.total(), h.weight))
    })?;
    let xs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let ws: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let ks = |name: &str, b: f64| -> Result<TestReport> {
        let ig = InverseGamma::new(b)?;
        weighted_ks(name, &xs, &ws, |a| ig.cdf(a), level)
    };
    let star = ks("total area vs inverse gamma(1/2, b*)", adj.b_star)?;
    let mut out = Outcome::default();
    out.reports.push(
        TestReport::new("weighted KS distance to inverse gamma(1/2, b*)", star.statistic, 0.05, level, n as u64)
            .with("test", "ks-distance")
            .with("b", adj.b_star)
            .with("n_eff", star.metadata.get("n_eff").cloned().unwrap_or_default()),
    );
    let mut dists = Vec::new();
    for (label, b) in [("tan", adj.b_tan), ("cot", adj.b_cot)] {
        let r = ks(&format!("total area vs candidate {label}/8"), b)?.with("candidate", label).with("b", b);
        dists.push((label, b, r.statistic));
        out.diagnostics.push(r);
    }
    out.put("b_star", adj.b_star);
    out.put("candidate_distances", &dists);
    out.put("first_passage_ks", [adj.ks_tan, adj.ks_cot]);
    out.put("effective_sample_size", slelab_core::stats::effective_sample_size(&ws));
    let mut csv = String::from("area,weight\n");
    for (x, w) in xs.iter().zip(&ws) {
        let _ = writeln!(csv, "{x},{w}");
    }
    out.tables.push(("area_samples".into(), csv));
    // weighted ECDF against the fitted law
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let total: f64 = ws.iter().sum();
    let mut acc = 0.0;
    let ecdf: Vec<(f64, f64)> = order
        .iter()
        .map(|&i| {
            acc += ws[i] / total;
            (xs[i].ln(), acc)
        })
        .collect();
    let ig = InverseGamma::new(adj.b_star)?;
    let law: Vec<(f64, f64)> = ecdf.iter().map(|&(lx, _)| (lx, ig.cdf(lx.exp()))).collect();
    let mut plot = Plot::new("area_ecdf", "weighted ECDF of total area", "log area", "F")
        .with(Series::new("weighted ECDF", ecdf, Style::Step))
        .with(Series::new("inverse gamma, b*", law, Style::Line));
    plot.provenance.push(("b_star".into(), format!("{}", adj.b_star)));
    out.plots.push(plot);
    Ok(out)
}

pub fn radial_mot(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params;
    let heavy = ctx.heavy;
    let (pairs, rings, nodes) = if heavy { (200, 256, 256) } else { (4, 48, 96) };
    let pairs = ctx.samples(pairs);
    let (g, f) = disk_grid(ctx, rings, rings)?;
    let t_end = ctx.horizon(1.0);
    let step = ctx.step(1e-3);
    let m = ctx.cfg.schedule.unwrap_or(50).max(2);
    let opts = ExtractOptions { boundary_nodes: ctx.cfg.boundary_nodes.unwrap_or(nodes), ..Default::default() };
    // schedule on the driving grid
    let schedule: Vec<f64> = (0..m).map(|i| ((t_end * i as f64 / (m - 1) as f64) / step).round() * step).collect();
    let runs = par_samples(pairs, |s| {
        let seed = derive_seed(ctx.seed(), s);
        let h = sample_lf_disk_fixed_length(&p, p.q - p.gamma / 4.0, 1.5 * p.gamma, 1.0, g.clone(), &f, derive_seed(seed, 0))?;
        let d = sample_radial_driving(p.kappa, t_end, step, derive_seed(seed, 1))?;
        let chain = evolve_forward_radial(d, &[])?;
        extract_boundary_process(&h, &p, &chain, &schedule, &opts)
    })?;
    let inc: Vec<(f64, f64, f64)> = runs.iter().flat_map(|r| r.increments()).collect();
    let (vx, vy, corr) = pooled_covariance(&inc)?;
    let cov = corr * (vx * vy).sqrt();
    let target_cov = p.corr * p.a_sq;
    let ident = runs.iter().map(|r| r.identity_error()).fold(0.0, f64::max);
    let mut out = Outcome::default();
    let cov_reports = vec![
        within("pooled Var(dX) / a^2", vx / p.a_sq, 1.0, 0.25, inc.len() as u64),
        within("pooled Var(dY) / a^2", vy / p.a_sq, 1.0, 0.25, inc.len() as u64),
        within("pooled Cov(dX, dY) / (corr a^2)", cov / target_cov, 1.0, 0.25, inc.len() as u64),
    ];
    let ident_report = TestReport::new("max |L - (l0 + X + Y)| / L", ident, 0.02, 0.0, pairs as u64).with("test", "tolerance");
    if heavy {
        out.reports.extend(cov_reports);
    } else {
        // a handful of coarse pairs cannot resolve the covariance
        out.diagnostics.extend(cov_reports);
    }
    out.reports.push(ident_report);
    out.put("scale", if heavy { "full" } else { "reduced" });
    out.put("pairs", pairs);
    out.put("grid", g.descriptor());
    out.put("var_x_over_a2", vx / p.a_sq);
    out.put("var_y_over_a2", vy / p.a_sq);
    out.put("corr", corr);
    out.put("target_corr", p.corr);
    out.put("identity_error", ident);
    out.put("refinements", runs.iter().map(|r| r.refinements).sum::<usize>());
    out.put("fallback_inversions", runs.iter().map(|r| r.fallback_inversions).sum::<usize>());
    out.put("terminated", runs.iter().filter(|r| r.terminated).count());
    let mut csv = String::from("pair,area_time,X,Y,L,tolerance\n");
    for (i, r) in runs.iter().enumerate() {
        for line in r.to_csv().lines().skip(1) {
            let _ = writeln!(csv, "{i},{line}");
        }
    }
    out.tables.push(("boundary_lengths".into(), csv));
    out.plots.push(
        Plot::new("increments", "boundary-length increments", "dX", "dY")
            .with(Series::new("(dX, dY)", inc.iter().map(|q| (q.0, q.1)).collect(), Style::Points)),
    );
    if let Some(r) = runs.first() {
        out.plots.push(
            Plot::new("trace", "boundary lengths of the first pair", "area time", "length")
                .with(Series::new("X", r.area_times.iter().copied().zip(r.x.iter().copied()).collect(), Style::Line))
                .with(Series::new("Y", r.area_times.iter().copied().zip(r.y.iter().copied()).collect(), Style::Line))
                .with(Series::new("L", r.area_times.iter().copied().zip(r.l.iter().copied()).collect(), Style::Line)),
        );
    }
    Ok(out)
}
