use super::{at_least, par_samples, Ctx, Outcome};
use crate::svg::{Plot, Series, Style};
use serde::Serialize;
use slelab_core::loewner::{
    evolve_forward_radial, evolve_forward_radial_with, evolve_reverse_radial, invert_chain_at, log_derivative_at_zero, probe_circle,
    sample_radial_driving, simulate_whole_plane, ChainOptions, Scheme,
};
use slelab_core::rng::derive_seed;
use slelab_core::stats::{ks_two_sample, order_fit, proportion_half_width, two_proportion, TestReport};
use slelab_core::{Error, Result, C64};
use std::fmt::Write as _;

const PROBES: usize = 16;

/// Max over record times of |log g_t'(0) - t| for one driving path.
fn capacity_error(d: slelab_core::loewner::DrivingPath, scheme: Scheme, records: &[f64]) -> Result<f64> {
    let mut opts = ChainOptions { record_times: Some(records.to_vec()), ..Default::default() };
    opts.control.scheme = scheme;
    if scheme == Scheme::Plain {
        // blocks commensurate with the record spacing
        opts.control.max_block = 25;
    }
    let c = evolve_forward_radial_with(d, &probe_circle(0.03, PROBES), &opts)?;
    let est = log_derivative_at_zero(&c, 0..PROBES);
    let mut worst = 0.0f64;
    for (t, e) in c.record_times().iter().zip(est) {
        let e = e.ok_or_else(|| Error::Diagnostic(format!("probe swallowed before t = {t}")))?;
        worst = worst.max((e - t).abs());
    }
    Ok(worst)
}

pub fn capacity_convergence(ctx: &Ctx) -> Result<Outcome> {
    let kappa = ctx.params.kappa;
    let t = ctx.horizon(1.0);
    let base = ctx.step(1e-3);
    let seeds = ctx.samples(5);
    let steps = [base, base / 2.0, base / 4.0];
    let records: Vec<f64> = (0..=20).map(|j| t * j as f64 / 20.0).collect();
    let per_seed = par_samples(seeds, |i| {
        let d = sample_radial_driving(kappa, t, base, derive_seed(ctx.seed(), i))?;
        let paths = [d.clone(), d.refine(), d.refine().refine()];
        let mut plain = Vec::new();
        let mut log = Vec::new();
        for p in paths {
            plain.push(capacity_error(p.clone(), Scheme::Plain, &records)?);
            log.push(capacity_error(p, Scheme::LogCoordinates, &records)?);
        }
        Ok((plain, log))
    })?;
    let mut out = Outcome::default();
    // worst case over seeds at each step
    let worst: Vec<f64> = (0..3).map(|k| per_seed.iter().map(|s| s.0[k]).fold(0.0, f64::max)).collect();
    let fit = order_fit(&steps, &worst)?;
    let decay = worst.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    out.reports.push(at_least("fitted order of the capacity error", fit.order, 0.9, seeds as u64).with("r_squared", fit.r_squared));
    out.reports.push(TestReport::new("capacity error decreases under halving", decay, 1.0, 0.0, seeds as u64).with("test", "max-ratio"));
    let log_worst = per_seed.iter().flat_map(|s| s.1.iter().copied()).fold(0.0, f64::max);
    out.diagnostics.push(
        TestReport::new("log-coordinate scheme capacity error", log_worst, 1e-10, 0.0, seeds as u64).with("test", "roundoff"),
    );
    out.put("steps", steps);
    out.put("max_error", &worst);
    out.put("order", fit.order);
    out.put("per_seed_order", per_seed.iter().map(|s| order_fit(&steps, &s.0).map(|f| f.order).unwrap_or(f64::NAN)).collect::<Vec<_>>());
    out.put("log_scheme_max_error", log_worst);
    let mut csv = String::from("seed,step,plain_error,log_error\n");
    for (i, (p, l)) in per_seed.iter().enumerate() {
        for k in 0..3 {
            let _ = writeln!(csv, "{i},{},{},{}", steps[k], p[k], l[k]);
        }
    }
    out.tables.push(("capacity_errors".into(), csv));
    let mut plot = Plot::new("capacity_convergence", "capacity error vs step", "log step", "log max error");
    for (i, (p, _)) in per_seed.iter().enumerate() {
        plot = plot.with(Series::new(format!("seed {i}"), steps.iter().zip(p).map(|(s, e)| (s.ln(), e.ln())).collect(), Style::Line));
    }
    out.plots.push(plot);
    Ok(out)
}

pub fn fixed_time_symmetry(ctx: &Ctx) -> Result<Outcome> {
    let kappa = ctx.params.kappa;
    let t = ctx.horizon(0.25);
    let step = ctx.step(1e-4);
    let n = ctx.samples(2000);
    let z0 = C64::new(0.4, 0.0);
    let (fwd_seed, rev_seed) = (derive_seed(ctx.seed(), 1), derive_seed(ctx.seed(), 2));
    // forward arm: g_T^{-1}(U_T z0), the hull-side image of z0 in the rotated frame
    let fwd = par_samples(n, |i| {
        let d = sample_radial_driving(kappa, t, step, derive_seed(fwd_seed, i))?;
        let k = d.len() - 1;
        let u = d.value(k);
        let c = evolve_forward_radial(d, &[])?;
        let time = c.driving.time(k);
        match invert_chain_at(&c, time, u * z0) {
            Ok(z) => Ok(Some(z)),
            Err(Error::InversionFailed { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    })?;
    let rev = par_samples(n, |i| {
        let c = evolve_reverse_radial(kappa, t, step, derive_seed(rev_seed, i), &[z0])?;
        c.tracked[0].trajectory.last().copied().flatten().ok_or(Error::NonFinite("reverse flow endpoint"))
    })?;
    let failed = fwd.iter().filter(|z| z.is_none()).count();
    if failed * 100 > n {
        return Err(Error::Diagnostic(format!("{failed} of {n} forward inversions failed")));
    }
    let fwd: Vec<C64> = fwd.into_iter().flatten().collect();
    let re = |v: &[C64]| v.iter().map(|z| z.re).collect::<Vec<_>>();
    let im = |v: &[C64]| v.iter().map(|z| z.im).collect::<Vec<_>>();
    let level = ctx.level();
    let mut out = Outcome::default();
    out.reports.push(ks_two_sample("Re of mapped point", &re(&fwd), &re(&rev), level)?);
    out.reports.push(ks_two_sample("Im of mapped point", &im(&fwd), &im(&rev), level)?);
    out.put("failed_inversions", failed);
    out.put("mean_modulus_forward", fwd.iter().map(|z| z.norm()).sum::<f64>() / fwd.len() as f64);
    out.put("mean_modulus_reverse", rev.iter().map(|z| z.norm()).sum::<f64>() / rev.len() as f64);
    let mut csv = String::from("arm,re,im\n");
    for (arm, v) in [("forward", &fwd), ("reverse", &rev)] {
        for z in v.iter() {
            let _ = writeln!(csv, "{arm},{},{}", z.re, z.im);
        }
    }
    out.tables.push(("mapped_points".into(), csv));
    for (name, f) in [("re", re as fn(&[C64]) -> Vec<f64>), ("im", im)] {
        out.plots.push(
            Plot::new(format!("ecdf_{name}"), format!("ECDF of {name} of the mapped point"), name, "F")
                .with(Series::ecdf("forward inverse", &f(&fwd)))
                .with(Series::ecdf("reverse flow", &f(&rev))),
        );
    }
    Ok(out)
}

/// Map applied to the second arm of the reversibility comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InversionMap {
    /// z -> 1/z, the automorphism switching 0 and infinity.
    Inversion,
    /// Power check: the second arm tracks (w, z), which cannot match unless p = 1/2.
    Identity,
}

impl InversionMap {
    fn apply(self, z: C64) -> C64 {
        match self {
            InversionMap::Inversion => z.inv(),
            InversionMap::Identity => z,
        }
    }
}

/// Hitting-order counts for one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProportionRow {
    pub z: (f64, f64),
    pub w: (f64, f64),
    /// tau_z < tau_w in the first arm.
    pub k1: u64,
    pub n1: u64,
    /// tau_{m(w)} < tau_{m(z)} in the second arm.
    pub k2: u64,
    pub n2: u64,
    pub censored1: u64,
    pub censored2: u64,
}

impl ProportionRow {
    pub fn p1(&self) -> f64 {
        self.k1 as f64 / self.n1 as f64
    }
    pub fn p2(&self) -> f64 {
        self.k2 as f64 / self.n2 as f64
    }
    pub fn test(&self, name: &str, level: f64) -> Result<TestReport> {
        Ok(two_proportion(name, self.k1, self.n1, self.k2, self.n2, level)?
            .with("z_point", format!("{}{:+}i", self.z.0, self.z.1))
            .with("w_point", format!("{}{:+}i", self.w.0, self.w.1)))
    }
}

/// For each pair (z, w), estimate P[tau_z < tau_w] from `n` whole-plane
/// chains and P[tau_{m(w)} < tau_{m(z)}] from `n` independent ones. All
/// pairs share the chains of an arm. More than 5% censored samples in any
/// pair is an error.
#[allow(clippy::too_many_arguments)]
pub fn reversibility_statistic(
    kappa: f64,
    pairs: &[(C64, C64)],
    n: usize,
    seed: u64,
    t0: f64,
    step: f64,
    horizon: f64,
    map: InversionMap,
) -> Result<Vec<ProportionRow>> {
    if !(kappa > 8.0) {
        return Err(Error::InvalidParameter(format!("hitting order needs kappa > 8, got {kappa}")));
    }
    if n == 0 || pairs.is_empty() {
        return Err(Error::InvalidParameter("need at least one pair and one sample".into()));
    }
    for &(z, w) in pairs {
        // z = 1/z is allowed: the unit-circle points in the standard pairs are fixed by inversion
        if [z, w].iter().any(|p| !(p.norm() > 0.0 && p.norm().is_finite())) || z == w {
            return Err(Error::InvalidParameter(format!("pair ({z}, {w}) needs distinct, nonzero, finite points")));
        }
    }
    let first: Vec<C64> = pairs.iter().flat_map(|&(z, w)| [z, w]).collect();
    let second: Vec<C64> = pairs.iter().flat_map(|&(z, w)| [map.apply(w), map.apply(z)]).collect();
    let arm = |pts: &[C64], which: u64| -> Result<Vec<Vec<Option<bool>>>> {
        par_samples(n, |i| {
            let c = simulate_whole_plane(kappa, t0, horizon, step, derive_seed(seed, 2 * i + which), pts)?;
            Ok(c.tracked
                .chunks(2)
                .map(|p| match (p[0].swallowed_at, p[1].swallowed_at) {
                    (Some(a), Some(b)) => Some(a < b),
                    _ => None,
                })
                .collect())
        })
    };
    let a1 = arm(&first, 0)?;
    let a2 = arm(&second, 1)?;
    let tally = |a: &[Vec<Option<bool>>], j: usize| {
        let done: Vec<bool> = a.iter().filter_map(|s| s[j]).collect();
        (done.iter().filter(|&&b| b).count() as u64, done.len() as u64)
    };
    let mut rows = Vec::new();
    for (j, &(z, w)) in pairs.iter().enumerate() {
        let (k1, n1) = tally(&a1, j);
        let (k2, n2) = tally(&a2, j);
        let (c1, c2) = (n as u64 - n1, n as u64 - n2);
        if c1 * 20 > n as u64 || c2 * 20 > n as u64 {
            return Err(Error::Diagnostic(format!("pair ({z}, {w}): {c1} and {c2} of {n} samples censored")));
        }
        rows.push(ProportionRow { z: (z.re, z.im), w: (w.re, w.im), k1, n1, k2, n2, censored1: c1, censored2: c2 });
    }
    Ok(rows)
}

fn rows_csv(rows: &[ProportionRow]) -> String {
    let mut s = String::from("z_re,z_im,w_re,w_im,k1,n1,p1,k2,n2,p2,censored1,censored2\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.6},{},{},{:.6},{},{}",
            r.z.0,
            r.z.1,
            r.w.0,
            r.w.1,
            r.k1,
            r.n1,
            r.p1(),
            r.k2,
            r.n2,
            r.p2(),
            r.censored1,
            r.censored2
        );
    }
    s
}

pub fn reversibility(ctx: &Ctx) -> Result<Outcome> {
    let kappa = ctx.params.kappa;
    let n = ctx.samples(4000);
    let (t0, step, horizon) = (ctx.truncation(6.0), ctx.step(1e-4), ctx.horizon(10.0));
    let level = ctx.level();
    let c = C64::new;
    let asym = [(c(1.0, 0.0), c(0.0, 2.0)), (c(2.0, 0.0), c(0.0, 0.5)), (c(1.0, 1.0), c(-3.0, 0.0))];
    let conj = (c(1.0, 1.0), c(1.0, -1.0));
    let mut pairs = asym.to_vec();
    pairs.push(conj);
    let rows = reversibility_statistic(kappa, &pairs, n, derive_seed(ctx.seed(), 1), t0, step, horizon, InversionMap::Inversion)?;
    let power = reversibility_statistic(kappa, &asym, n, derive_seed(ctx.seed(), 2), t0, step, horizon, InversionMap::Identity)?;

    let mut out = Outcome::default();
    for r in &rows[..asym.len()] {
        out.reports.push(r.test("p1 = p2 under inversion", level)?);
    }
    let cr = &rows[asym.len()];
    let hw = proportion_half_width(0.5, cr.n1, level);
    out.reports.push(TestReport::new("conjugate pair p = 1/2", (cr.p1() - 0.5).abs(), hw, level, cr.n1).with("test", "proportion-ci").with("p", cr.p1()));
    let power_tests = power.iter().map(|r| r.test("power: identity in place of inversion", level)).collect::<Result<Vec<_>>>()?;
    let zmax = power_tests.iter().map(|r| r.statistic).fold(0.0, f64::max);
    out.reports.push(at_least("power check rejects on some pair (max |z|)", zmax, power_tests[0].critical_value, n as u64));
    out.diagnostics.extend(power_tests);
    out.put("rows", &rows);
    out.put("power_rows", &power);
    out.put("p1", rows.iter().map(|r| r.p1()).collect::<Vec<_>>());
    out.put("p2", rows.iter().map(|r| r.p2()).collect::<Vec<_>>());
    out.tables.push(("proportions".into(), rows_csv(&rows)));
    out.tables.push(("power_proportions".into(), rows_csv(&power)));
    out.plots.push(
        Plot::new("proportions", "hitting-order proportions", "p1 = P[tau_z < tau_w]", "p2")
            .with(Series::new("diagonal", vec![(0.0, 0.0), (1.0, 1.0)], Style::Line))
            .with(Series::new("inversion", rows.iter().map(|r| (r.p1(), r.p2())).collect(), Style::Points))
            .with(Series::new("identity (power)", power.iter().map(|r| (r.p1(), r.p2())).collect(), Style::Points)),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reversibility_statistic_checks_inputs() {
        let c = C64::new;
        let ok = [(c(1.0, 0.0), c(0.0, 2.0))];
        assert!(reversibility_statistic(6.0, &ok, 10, 1, 6.0, 1e-3, 10.0, InversionMap::Inversion).is_err());
        let bad = [(c(1.0, 0.0), c(1.0, 0.0))];
        assert!(reversibility_statistic(10.0, &bad, 10, 1, 6.0, 1e-3, 10.0, InversionMap::Inversion).is_err());
        let zero = [(c(0.0, 0.0), c(0.0, 2.0))];
        assert!(reversibility_statistic(10.0, &zero, 10, 1, 6.0, 1e-3, 10.0, InversionMap::Inversion).is_err());
    }

    #[test]
    fn small_run_is_deterministic() {
        let c = C64::new;
        let pairs = [(c(1.0, 0.0), c(0.0, 2.0))];
        let a = reversibility_statistic(10.0, &pairs, 40, 3, 6.0, 1e-3, 10.0, InversionMap::Inversion).unwrap();
        let b = reversibility_statistic(10.0, &pairs, 40, 3, 6.0, 1e-3, 10.0, InversionMap::Inversion).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].n1 + a[0].censored1, 40);
        // the identity arm tracks (w, z): its order flips relative to the first arm's law
        let id = reversibility_statistic(10.0, &pairs, 40, 3, 6.0, 1e-3, 10.0, InversionMap::Identity).unwrap();
        assert_eq!(id[0].k1, a[0].k1);
    }
}
