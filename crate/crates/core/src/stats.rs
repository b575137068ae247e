//! Hypothesis tests and estimators used by the experiments.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// A test outcome. The verdict is always `statistic < critical_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub critical_value: f64,
    pub level: f64,
    pub n: u64,
    pub verdict: Verdict,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, critical_value: f64, level: f64, n: u64) -> Self {
        let verdict = Verdict::from_bool(statistic.is_finite() && statistic < critical_value);
        Self { name: name.into(), statistic, critical_value, level, n, verdict, metadata: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    /// Check that the stored verdict follows from the stored numbers.
    pub fn is_consistent(&self) -> bool {
        let expect = Verdict::from_bool(self.statistic.is_finite() && self.statistic < self.critical_value);
        expect == self.verdict
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| crate::Error::Decode(e.to_string()))
    }
}

/// Asymptotic Kolmogorov critical constant c(alpha) = sqrt(-ln(alpha/2)/2).
pub fn kolmogorov_constant(level: f64) -> f64 {
    (-0.5 * (level / 2.0).ln()).sqrt()
}

/// Asymptotic Kolmogorov survival function P[K > lambda].
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("level must lie in (0,1), got {level}"));
    }
    Ok(())
}

fn sorted_finite(xs: &[f64], what: &str) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return invalid(format!("{what}: empty sample"));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return invalid(format!("{what}: non-finite sample"));
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

/// sup |F_a - F_b|.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted_finite(a, "ks sample a")?;
    let b = sorted_finite(b, "ks sample b")?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

pub fn ks_two_sample(name: &str, a: &[f64], b: &[f64], level: f64) -> Result<TestReport> {
    check_level(level)?;
    let d = ks_distance(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let ne = n * m / (n + m);
    let crit = kolmogorov_constant(level) / ne.sqrt();
    Ok(TestReport::new(name, d, crit, level, (a.len() + b.len()) as u64)
        .with("test", "ks-two-sample")
        .with("p_value", format!("{:.6}", kolmogorov_survival(ne.sqrt() * d))))
}

/// sup |F_n - F| for a continuous reference cdf.
pub fn ks_one_sample_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let v = sorted_finite(xs, "ks sample")?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

pub fn ks_one_sample(name: &str, xs: &[f64], cdf: impl Fn(f64) -> f64, level: f64) -> Result<TestReport> {
    check_level(level)?;
    let d = ks_one_sample_distance(xs, cdf)?;
    let n = xs.len() as f64;
    Ok(TestReport::new(name, d, kolmogorov_constant(level) / n.sqrt(), level, xs.len() as u64)
        .with("test", "ks-one-sample")
        .with("p_value", format!("{:.6}", kolmogorov_survival(n.sqrt() * d))))
}

/// One-sample KS for right-censored data: `xs` are the observed values
/// (all below `censor_at`) out of `n` draws, the rest were censored at
/// `censor_at`. The supremum runs over [0, censor_at] only.
pub fn ks_one_sample_censored(
    name: &str,
    xs: &[f64],
    n: usize,
    censor_at: f64,
    cdf: impl Fn(f64) -> f64,
    level: f64,
) -> Result<TestReport> {
    check_level(level)?;
    if n == 0 || xs.len() > n {
        return invalid("censored ks: need 0 < observed <= n");
    }
    let v = sorted_finite(xs, "censored ks sample")?;
    if v.last().is_some_and(|&x| x > censor_at) {
        return invalid("censored ks: observation beyond the censoring point");
    }
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    d = d.max((cdf(censor_at) - v.len() as f64 / nf).abs());
    Ok(TestReport::new(name, d, kolmogorov_constant(level) / nf.sqrt(), level, n as u64)
        .with("test", "ks-one-sample-censored")
        .with("censored", n - v.len()))
}

/// (sum w)^2 / sum w^2.
pub fn effective_sample_size(w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

fn weighted_sorted(xs: &[f64], w: &[f64]) -> Result<(Vec<(f64, f64)>, f64)> {
    if xs.len() != w.len() {
        return invalid("weights and samples differ in length");
    }
    if xs.is_empty() {
        return invalid("weighted ks: empty sample");
    }
    if xs.iter().chain(w).any(|x| !x.is_finite()) || w.iter().any(|&x| x < 0.0) {
        return invalid("weighted ks: non-finite sample or negative weight");
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return invalid("weighted ks: zero total weight");
    }
    let mut v: Vec<(f64, f64)> = xs.iter().copied().zip(w.iter().map(|x| x / total)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok((v, total))
}

/// Weighted one-sample KS; the critical value uses the effective sample size.
pub fn weighted_ks(name: &str, xs: &[f64], w: &[f64], cdf: impl Fn(f64) -> f64, level: f64) -> Result<TestReport> {
    check_level(level)?;
    let (v, _) = weighted_sorted(xs, w)?;
    let mut d = 0.0f64;
    let mut acc = 0.0;
    let mut i = 0;
    while i < v.len() {
        let x = v[i].0;
        let before = acc;
        while i < v.len() && v[i].0 == x {
            acc += v[i].1;
            i += 1;
        }
        let f = cdf(x);
        d = d.max((acc - f).abs()).max((f - before).abs());
    }
    let ne = effective_sample_size(w);
    Ok(TestReport::new(name, d, kolmogorov_constant(level) / ne.sqrt(), level, xs.len() as u64)
        .with("test", "weighted-ks")
        .with("n_eff", format!("{ne:.3}")))
}

/// Weighted two-sample KS.
pub fn weighted_ks_two_sample(
    name: &str,
    a: &[f64],
    wa: &[f64],
    b: &[f64],
    wb: &[f64],
    level: f64,
) -> Result<TestReport> {
    check_level(level)?;
    let (va, _) = weighted_sorted(a, wa)?;
    let (vb, _) = weighted_sorted(b, wb)?;
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb, mut d) = (0.0f64, 0.0f64, 0.0f64);
    while i < va.len() || j < vb.len() {
        let x = match (va.get(i), vb.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => break,
        };
        while i < va.len() && va[i].0 <= x {
            fa += va[i].1;
            i += 1;
        }
        while j < vb.len() && vb[j].0 <= x {
            fb += vb[j].1;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    let (n, m) = (effective_sample_size(wa), effective_sample_size(wb));
    let ne = n * m / (n + m);
    Ok(TestReport::new(name, d, kolmogorov_constant(level) / ne.sqrt(), level, (a.len() + b.len()) as u64)
        .with("test", "weighted-ks-two-sample")
        .with("n_eff", format!("{ne:.3}")))
}

/// Per-unit-time covariance of increment pairs with jackknife standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovEstimate {
    pub var_x: f64,
    pub var_y: f64,
    pub corr: f64,
    pub se_var_x: f64,
    pub se_var_y: f64,
    pub se_corr: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Moments {
    fn add(&mut self, x: f64, y: f64, sign: f64) {
        self.n += sign;
        self.sx += sign * x;
        self.sy += sign * y;
        self.sxx += sign * x * x;
        self.syy += sign * y * y;
        self.sxy += sign * x * y;
    }
    fn minus(&self, o: &Moments) -> Moments {
        Moments {
            n: self.n - o.n,
            sx: self.sx - o.sx,
            sy: self.sy - o.sy,
            sxx: self.sxx - o.sxx,
            syy: self.syy - o.syy,
            sxy: self.sxy - o.sxy,
        }
    }
    fn estimate(&self, dt: f64) -> (f64, f64, f64) {
        let n = self.n;
        let (mx, my) = (self.sx / n, self.sy / n);
        let cxx = (self.sxx - n * mx * mx) / (n - 1.0);
        let cyy = (self.syy - n * my * my) / (n - 1.0);
        let cxy = (self.sxy - n * mx * my) / (n - 1.0);
        let corr = if cxx > 0.0 && cyy > 0.0 { (cxy / (cxx * cyy).sqrt()).clamp(-1.0, 1.0) } else { f64::NAN };
        (cxx / dt, cyy / dt, corr)
    }
}

pub fn cov_estimate(pairs: &[(f64, f64)], dt: f64) -> Result<CovEstimate> {
    if pairs.len() < 3 {
        return invalid("cov_estimate needs at least 3 pairs");
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid("cov_estimate: dt must be positive");
    }
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return invalid("cov_estimate: non-finite increment");
    }
    let mut all = Moments::default();
    for &(x, y) in pairs {
        all.add(x, y, 1.0);
    }
    let (vx, vy, c) = all.estimate(dt);
    // grouped delete-a-block jackknife
    let g = pairs.len().min(200);
    let mut blocks = vec![Moments::default(); g];
    for (i, &(x, y)) in pairs.iter().enumerate() {
        blocks[i * g / pairs.len()].add(x, y, 1.0);
    }
    let mut reps = Vec::with_capacity(g);
    for b in &blocks {
        let m = all.minus(b);
        if m.n >= 3.0 {
            reps.push(m.estimate(dt));
        }
    }
    let k = reps.len() as f64;
    let se = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
        let mean = reps.iter().map(f).sum::<f64>() / k;
        ((k - 1.0) / k * reps.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>()).sqrt()
    };
    Ok(CovEstimate {
        var_x: vx,
        var_y: vy,
        corr: c,
        se_var_x: se(&|r| r.0),
        se_var_y: se(&|r| r.1),
        se_corr: if c.is_nan() { f64::NAN } else { se(&|r| r.2) },
        n: pairs.len(),
    })
}

/// Two-sided pooled two-proportion z-test; statistic is |z|.
pub fn two_proportion(name: &str, k1: u64, n1: u64, k2: u64, n2: u64, level: f64) -> Result<TestReport> {
    check_level(level)?;
    if n1 == 0 || n2 == 0 || k1 > n1 || k2 > n2 {
        return invalid("two_proportion: invalid counts");
    }
    let (p1, p2) = (k1 as f64 / n1 as f64, k2 as f64 / n2 as f64);
    let p = (k1 + k2) as f64 / (n1 + n2) as f64;
    let se = (p * (1.0 - p) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let z = if se > 0.0 {
        (p1 - p2) / se
    } else if p1 == p2 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(TestReport::new(name, z.abs(), normal_quantile(1.0 - level / 2.0), level, n1 + n2)
        .with("test", "two-proportion")
        .with("p1", format!("{p1:.6}"))
        .with("p2", format!("{p2:.6}"))
        .with("z", format!("{z:.6}")))
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Wald interval half-width for a proportion.
pub fn proportion_half_width(p: f64, n: u64, level: f64) -> f64 {
    normal_quantile(1.0 - level / 2.0) * (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub order: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares slope of log(error) against log(step).
pub fn order_fit(steps: &[f64], errors: &[f64]) -> Result<OrderFit> {
    if steps.len() != errors.len() || steps.len() < 2 {
        return invalid("order_fit needs at least two (step, error) pairs");
    }
    if steps.iter().chain(errors).any(|&v| !(v > 0.0 && v.is_finite())) {
        return invalid("order_fit: steps and errors must be positive");
    }
    let xs: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("order_fit: steps are all equal");
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(OrderFit { order: slope, intercept: my - slope * mx, r_squared: r2 })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Weighted mean.
pub fn weighted_mean(xs: &[f64], w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    xs.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / s
}
