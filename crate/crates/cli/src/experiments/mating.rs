use super::{at_least, par_samples, within, Ctx, Outcome};
use crate::svg::{Plot, Series, Style};
use slelab_core::mot::{
    conditioned_passage_marginal, sample_crt, sample_sphere_pair, stopped_crt_disk, InverseGamma, ELL_MIN, GUARD_FACTOR,
};
use slelab_core::rng::derive_seed;
use slelab_core::stats::{cov_estimate, ks_distance, ks_one_sample_censored, variance, TestReport};
use slelab_core::{LqgParams, Result};
use std::fmt::Write as _;

/// Scatter plots keep at most this many points.
const PLOT_POINTS: usize = 2000;

pub fn crt_covariance(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params;
    let n = ctx.samples(100_000);
    let t = ctx.horizon(1.0);
    let inc = par_samples(n, |i| {
        let path = sample_crt(&p, t, t / 2.0, derive_seed(ctx.seed(), i))?;
        Ok((path.x[path.len() - 1], path.y[path.len() - 1]))
    })?;
    let est = cov_estimate(&inc, t)?;
    let sum: Vec<f64> = inc.iter().map(|(x, y)| x + y).collect();
    let diff: Vec<f64> = inc.iter().map(|(x, y)| x - y).collect();
    let (vs, vd) = (variance(&sum) / t, variance(&diff) / t);
    let nn = n as u64;
    let mut out = Outcome::default();
    out.reports.push(within("Var(X) / a^2", est.var_x / p.a_sq, 1.0, 0.03, nn));
    out.reports.push(within("Var(Y) / a^2", est.var_y / p.a_sq, 1.0, 0.03, nn));
    out.reports.push(within("corr(X, Y)", est.corr, p.corr, 0.02, nn));
    out.reports.push(within("Var(X + Y) / 2a^2(1 + corr)", vs / p.sum_variance(), 1.0, 0.03, nn));
    out.reports.push(within("Var(X - Y) / 2a^2(1 - corr)", vd / p.diff_variance(), 1.0, 0.03, nn));
    out.put("estimate", &est);
    out.put("a_sq", p.a_sq);
    out.put("target_corr", p.corr);
    out.put("var_sum", vs);
    out.put("var_diff", vd);
    let mut csv = String::from("x,y\n");
    for (x, y) in &inc {
        let _ = writeln!(csv, "{x},{y}");
    }
    out.tables.push(("increments".into(), csv));
    out.plots.push(
        Plot::new("covariance_scatter", "unit-time increments", "X", "Y")
            .with(Series::new("(X_T, Y_T)", inc.iter().take(PLOT_POINTS).copied().collect(), Style::Points)),
    );
    let trace = sample_crt(&p, t, t / 500.0, derive_seed(ctx.seed(), u64::MAX))?;
    out.plots.push(
        Plot::new("trace", "one path", "t", "value")
            .with(Series::new("X", trace.times.iter().copied().zip(trace.x.iter().copied()).collect(), Style::Line))
            .with(Series::new("Y", trace.times.iter().copied().zip(trace.y.iter().copied()).collect(), Style::Line)),
    );
    Ok(out)
}

/// First-passage run that fixes the inverse-gamma scale.
#[derive(Debug, Clone)]
pub struct Adjudication {
    /// Scale 1/(2 sigma^2) implied by the sum variance, with its test.
    pub report: TestReport,
    pub b_tan: f64,
    pub b_cot: f64,
    pub ks_tan: TestReport,
    pub ks_cot: TestReport,
    /// The candidate with the smaller KS statistic.
    pub b_star: f64,
    pub taus: Vec<f64>,
    pub censored: usize,
}

pub fn adjudicate(p: &LqgParams, n: usize, step: f64, seed: u64, level: f64) -> Result<Adjudication> {
    let ell0 = 1.0;
    let guard = GUARD_FACTOR * ell0 * ell0;
    let runs = par_samples(n, |i| {
        let s = stopped_crt_disk(p, ell0, step, derive_seed(seed, i), guard)?;
        Ok((!s.censored).then_some(s.tau))
    })?;
    let taus: Vec<f64> = runs.iter().flatten().copied().collect();
    let censored = n - taus.len();
    let ks = |name: &str, b: f64| -> Result<TestReport> {
        let ig = InverseGamma::new(b)?;
        Ok(ks_one_sample_censored(name, &taus, n, guard, |a| ig.cdf(a), level)?.with("b", b))
    };
    let sigma_law = InverseGamma::first_passage(ell0, p.sum_variance())?;
    let report = ks("first-passage time vs inverse gamma(1/2, 1/(2 sigma^2))", sigma_law.b)?;
    let th = p.theta();
    let (b_tan, b_cot) = (ell0 * ell0 * th.tan() / 8.0, ell0 * ell0 / (8.0 * th.tan()));
    let ks_tan = ks("candidate tan/8", b_tan)?;
    let ks_cot = ks("candidate cot/8", b_cot)?;
    let b_star = if ks_tan.statistic < ks_cot.statistic { b_tan } else { b_cot };
    Ok(Adjudication { report, b_tan, b_cot, ks_tan, ks_cot, b_star, taus, censored })
}

pub fn first_passage_oracle(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params;
    let n = ctx.samples(100_000);
    let adj = adjudicate(&p, n, ctx.step(1e-4), ctx.seed(), ctx.level())?;
    let mut out = Outcome::default();
    out.reports.push(adj.report.clone());
    out.diagnostics.push(adj.ks_tan.clone());
    out.diagnostics.push(adj.ks_cot.clone());
    out.put("sigma_sq", p.sum_variance());
    out.put("b_sigma", adj.report.metadata.get("b"));
    out.put("b_tan", adj.b_tan);
    out.put("b_cot", adj.b_cot);
    out.put("b_star", adj.b_star);
    out.put("censored", adj.censored);
    out.put("censored_expected", n as f64 * (1.0 - InverseGamma::first_passage(1.0, p.sum_variance())?.cdf(GUARD_FACTOR)));
    let mut csv = String::from("tau\n");
    for t in &adj.taus {
        let _ = writeln!(csv, "{t}");
    }
    out.tables.push(("passage_times".into(), csv));
    let logs: Vec<f64> = adj.taus.iter().map(|t| t.ln()).collect();
    let mut ecdf = Series::ecdf("stopped CRT", &logs);
    // the ECDF is over all n draws, censored ones sit above the guard
    let scale = adj.taus.len() as f64 / n as f64;
    ecdf.points.iter_mut().for_each(|q| q.1 *= scale);
    let mut plot = Plot::new("passage_ecdf", "first-passage time", "log tau", "F").with(ecdf);
    for (label, b) in [("b = cot/8", adj.b_cot), ("b = tan/8", adj.b_tan)] {
        let ig = InverseGamma::new(b)?;
        let curve = (0..=200).map(|k| -8.0 + 15.0 * k as f64 / 200.0).map(|lx| (lx, ig.cdf(lx.exp()))).collect();
        plot = plot.with(Series::new(label, curve, Style::Line));
    }
    out.plots.push(plot);
    Ok(out)
}

pub fn excursion_limit(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params;
    let n = ctx.samples(10_000);
    let t = 0.5;
    // one seed for every level: draw i shares its random numbers across levels
    let seed = ctx.seed();
    let reference = conditioned_passage_marginal(&p, ELL_MIN, t, n, seed)?;
    let levels = [0.05, 0.025];
    let mut dist = Vec::new();
    let mut samples = Vec::new();
    for &ell in &levels {
        let xs = conditioned_passage_marginal(&p, ell, t, n, seed)?;
        dist.push(ks_distance(&xs, &reference)?);
        samples.push(xs);
    }
    let mut out = Outcome::default();
    out.reports.push(TestReport::new("KS distance at l = 0.025", dist[1], 0.03, 0.0, n as u64).with("test", "ks-distance"));
    out.reports.push(
        TestReport::new("KS distance decreases with l (d(0.025) - d(0.05))", dist[1] - dist[0], 0.0, 0.0, n as u64)
            .with("test", "monotone")
            .with("d_005", dist[0])
            .with("d_0025", dist[1]),
    );
    out.put("levels", levels);
    out.put("ell_min", ELL_MIN);
    out.put("distances", &dist);
    out.put("time", t);
    let mut csv = String::from("ell,value\n");
    for (ell, xs) in levels.iter().chain([&ELL_MIN]).zip(samples.iter().chain([&reference])) {
        for x in xs {
            let _ = writeln!(csv, "{ell},{x}");
        }
    }
    out.tables.push(("marginals".into(), csv));
    out.plots.push(
        Plot::new("marginal_ecdf", "conditioned first-passage marginal at t = 0.5", "L_t", "F")
            .with(Series::ecdf("l = 0.05", &samples[0]))
            .with(Series::ecdf("l = 0.025", &samples[1]))
            .with(Series::ecdf("l_min", &reference)),
    );
    Ok(out)
}

pub fn sphere_mot(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params;
    let n = ctx.samples(10_000);
    let step = ctx.step(1e-3);
    let stats = par_samples(n, |i| {
        let s = sample_sphere_pair(&p, step, derive_seed(ctx.seed(), i))?;
        let (qz, ql) = s.quadratic_variations();
        Ok((s.tau, qz, ql))
    })?;
    let min_tau = stats.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let (qz, ql) = stats.iter().fold((0.0, 0.0), |a, s| (a.0 + s.1, a.1 + s.2));
    let ratio = qz / ql;
    let target = p.diff_variance() / p.sum_variance();
    let mut out = Outcome::default();
    out.reports.push(at_least("shortest duration", min_tau, 1.0 - 1e-12, n as u64));
    out.reports.push(within("QV ratio Z / L over cot^2", ratio / target, 1.0, 0.05, n as u64).with("ratio", ratio));
    out.put("min_duration", min_tau);
    out.put("qv_ratio", ratio);
    out.put("target_ratio", target);
    let mut csv = String::from("duration,qv_z,qv_l\n");
    for s in &stats {
        let _ = writeln!(csv, "{},{},{}", s.0, s.1, s.2);
    }
    out.tables.push(("pairs".into(), csv));
    let first = sample_sphere_pair(&p, step, derive_seed(ctx.seed(), 0))?;
    out.plots.push(
        Plot::new("trace", "first (L, Z) pair", "t", "value")
            .with(Series::new("L", first.times.iter().copied().zip(first.l.iter().copied()).collect(), Style::Line))
            .with(Series::new("Z", first.times.iter().copied().zip(first.z.iter().copied()).collect(), Style::Line)),
    );
    out.plots.push(Plot::new("durations", "ECDF of log duration", "log tau", "F").with(Series::ecdf(
        "duration",
        &stats.iter().map(|s| s.0.ln()).collect::<Vec<_>>(),
    )));
    Ok(out)
}
