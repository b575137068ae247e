//! Experiment bodies. Each returns an [`Outcome`]; the runner writes it out.

mod field;
mod loewner;
pub(crate) mod mating;

use crate::catalog::Entry;
use crate::config::ExperimentConfig;
use crate::svg::Plot;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use slelab_core::stats::TestReport;
use slelab_core::{LqgParams, Result};
use std::collections::BTreeMap;

pub use loewner::{reversibility_statistic, InversionMap, ProportionRow};

/// Everything an experiment produces.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    /// Tests that decide the exit code.
    pub reports: Vec<TestReport>,
    /// Reported alongside, never gating.
    pub diagnostics: Vec<TestReport>,
    pub summary: BTreeMap<String, Value>,
    /// (file stem, CSV body).
    pub tables: Vec<(String, String)>,
    pub plots: Vec<Plot>,
}

impl Outcome {
    pub fn put(&mut self, key: &str, v: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed())
    }
}

/// Resolved settings handed to an experiment.
pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub entry: &'static Entry,
    pub params: LqgParams,
    pub heavy: bool,
}

impl Ctx<'_> {
    pub fn samples(&self, default: usize) -> usize {
        self.cfg.samples.unwrap_or(default)
    }
    pub fn step(&self, default: f64) -> f64 {
        self.cfg.step.unwrap_or(default)
    }
    pub fn horizon(&self, default: f64) -> f64 {
        self.cfg.horizon.unwrap_or(default)
    }
    pub fn truncation(&self, default: f64) -> f64 {
        self.cfg.truncation.unwrap_or(default)
    }
    pub fn seed(&self) -> u64 {
        self.cfg.seed()
    }
    pub fn level(&self) -> f64 {
        self.cfg.level()
    }
    /// (rings, angles, eps) with eps defaulting to pi / angles.
    pub fn grid(&self, rings: usize, angles: usize) -> (usize, usize, f64) {
        let r = self.cfg.grid_rings.unwrap_or(rings);
        let a = self.cfg.grid_angles.unwrap_or(angles);
        (r, a, self.cfg.grid_eps.unwrap_or(std::f64::consts::PI / a as f64))
    }
}

/// Map over sample indices on the worker pool; results come back in index
/// order, so reductions over them do not depend on the thread count.
pub(crate) fn par_samples<T: Send>(n: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n as u64).into_par_iter().map(f).collect()
}

/// A ">= bound" requirement as a report (statistic -value, critical -bound).
pub(crate) fn at_least(name: &str, value: f64, bound: f64, n: u64) -> TestReport {
    TestReport::new(name, -value, -bound, 0.0, n).with("test", "at-least").with("value", value).with("bound", bound)
}

/// A "|value - target| <= tol" requirement as a report.
pub(crate) fn within(name: &str, value: f64, target: f64, tol: f64, n: u64) -> TestReport {
    TestReport::new(name, (value - target).abs(), tol, 0.0, n).with("test", "tolerance").with("value", value).with("target", target)
}

pub fn dispatch(ctx: &Ctx) -> Result<Outcome> {
    match ctx.entry.name {
        "capacity-convergence" => loewner::capacity_convergence(ctx),
        "fixed-time-symmetry" => loewner::fixed_time_symmetry(ctx),
        "reversibility" => loewner::reversibility(ctx),
        "girsanov-exactness" => field::girsanov_exactness(ctx),
        "area-law" => field::area_law(ctx),
        "radial-mot" => field::radial_mot(ctx),
        "crt-covariance" => mating::crt_covariance(ctx),
        "first-passage-oracle" => mating::first_passage_oracle(ctx),
        "excursion-limit" => mating::excursion_limit(ctx),
        "sphere-mot" => mating::sphere_mot(ctx),
        other => Err(slelab_core::Error::InvalidParameter(format!("no runner for {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_reports() {
        assert!(at_least("o", 0.95, 0.9, 3).passed());
        assert!(!at_least("o", 0.85, 0.9, 3).passed());
        assert!(within("v", 1.02, 1.0, 0.03, 1).passed());
        assert!(!within("v", 0.96, 1.0, 0.03, 1).passed());
        assert!(within("v", 1.0, 1.0, 0.03, 1).is_consistent());
    }

    #[test]
    fn par_samples_keeps_order() {
        let v = par_samples(100, |i| Ok(i * i)).unwrap();
        assert_eq!(v, (0..100u64).map(|i| i * i).collect::<Vec<_>>());
        assert!(par_samples(10, |i| if i == 7 { Err(slelab_core::Error::Singular) } else { Ok(i) }).is_err());
    }
}
