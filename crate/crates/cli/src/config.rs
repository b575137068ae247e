//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may appear
//! at most once; unknown keys are rejected.

use crate::catalog;
use serde::{Deserialize, Serialize};
use slelab_core::LqgParams;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("bad value for `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("unknown experiment `{0}` (see `lab list`)")]
    UnknownExperiment(String),
    #[error("no experiment given")]
    MissingExperiment,
    #[error("give either gamma or kappa, not both")]
    BothGammaKappa,
    #[error("{0}")]
    Invalid(String),
}

/// Keys accepted in config files and by `--set`.
pub const KEYS: &[&str] = &[
    "experiment",
    "gamma",
    "kappa",
    "samples",
    "seed",
    "step",
    "horizon",
    "truncation",
    "grid_rings",
    "grid_angles",
    "grid_eps",
    "schedule",
    "boundary_nodes",
    "level",
    "out",
    "heavy",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub step: Option<f64>,
    /// Capacity horizon T.
    pub horizon: Option<f64>,
    /// Whole-plane truncation depth T0.
    pub truncation: Option<f64>,
    pub grid_rings: Option<usize>,
    pub grid_angles: Option<usize>,
    pub grid_eps: Option<f64>,
    /// Number of scheduled extraction times.
    pub schedule: Option<usize>,
    pub boundary_nodes: Option<usize>,
    pub level: Option<f64>,
    pub out: Option<PathBuf>,
    pub heavy: Option<bool>,
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| ConfigError::Value { key: key.into(), msg: format!("`{v}`: {e}") })
}

fn positive(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = num(key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(ConfigError::Value { key: key.into(), msg: format!("must be positive, got {v}") });
    }
    Ok(x)
}

fn count(key: &str, v: &str) -> Result<usize, ConfigError> {
    let n: usize = num(key, v)?;
    if n == 0 {
        return Err(ConfigError::Value { key: key.into(), msg: "must be at least 1".into() });
    }
    Ok(n)
}

impl ExperimentConfig {
    /// Parse a config file body.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: i + 1, msg: format!("expected `key = value`, got `{line}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1, msg: "empty key".into() });
            }
            if seen.contains(&k) {
                return Err(ConfigError::Duplicate(k.into()));
            }
            seen.push(k);
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "experiment" => self.experiment = Some(v.to_string()),
            "gamma" => self.gamma = Some(num(key, v)?),
            "kappa" => self.kappa = Some(num(key, v)?),
            "samples" => self.samples = Some(count(key, v)?),
            "seed" => self.seed = Some(num(key, v)?),
            "step" => self.step = Some(positive(key, v)?),
            "horizon" => self.horizon = Some(positive(key, v)?),
            "truncation" => self.truncation = Some(positive(key, v)?),
            "grid_rings" => self.grid_rings = Some(count(key, v)?),
            "grid_angles" => self.grid_angles = Some(count(key, v)?),
            "grid_eps" => self.grid_eps = Some(positive(key, v)?),
            "schedule" => self.schedule = Some(count(key, v)?),
            "boundary_nodes" => self.boundary_nodes = Some(count(key, v)?),
            "level" => {
                let l: f64 = num(key, v)?;
                if !(l > 0.0 && l < 1.0) {
                    return Err(ConfigError::Value { key: key.into(), msg: format!("must lie in (0, 1), got {v}") });
                }
                self.level = Some(l);
            }
            "out" => {
                if v.is_empty() {
                    return Err(ConfigError::Value { key: key.into(), msg: "empty path".into() });
                }
                self.out = Some(PathBuf::from(v));
            }
            "heavy" => self.heavy = Some(num(key, v)?),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Check the experiment name and the parameter choice.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let name = self.experiment.as_deref().ok_or(ConfigError::MissingExperiment)?;
        let entry = catalog::find(name).ok_or_else(|| ConfigError::UnknownExperiment(name.into()))?;
        if self.gamma.is_some() && self.kappa.is_some() {
            return Err(ConfigError::BothGammaKappa);
        }
        let p = self.params(entry.default_kappa)?;
        if let Some(k) = entry.kappa_above {
            if p.kappa <= k {
                return Err(ConfigError::Invalid(format!("{name} needs kappa > {k}, got {}", p.kappa)));
            }
        }
        if self.grid_rings.is_some_and(|r| r < 2) || self.grid_angles.is_some_and(|a| a < 4 || a % 2 != 0) {
            return Err(ConfigError::Invalid("grid needs at least 2 rings and an even number (>= 4) of angles".into()));
        }
        Ok(())
    }

    /// LQG parameters from gamma or kappa, falling back to `default_kappa`.
    pub fn params(&self, default_kappa: f64) -> Result<LqgParams, ConfigError> {
        let p = match (self.gamma, self.kappa) {
            (Some(_), Some(_)) => return Err(ConfigError::BothGammaKappa),
            (Some(g), None) => LqgParams::from_gamma(g),
            (None, Some(k)) => LqgParams::from_kappa(k),
            (None, None) => LqgParams::from_kappa(default_kappa),
        };
        p.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn name(&self) -> &str {
        self.experiment.as_deref().unwrap_or("")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn level(&self) -> f64 {
        self.level.unwrap_or(0.01)
    }

    pub fn heavy(&self) -> bool {
        self.heavy.unwrap_or(false)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results").join(self.name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_flat_file() {
        let c = ExperimentConfig::parse("# crt run\nexperiment = crt-covariance\nkappa=16\n\nsamples = 1000\nseed = 7\n").unwrap();
        assert_eq!(c.name(), "crt-covariance");
        assert_eq!(c.kappa, Some(16.0));
        assert_eq!(c.samples, Some(1000));
        assert_eq!(c.seed(), 7);
        c.validate().unwrap();
        assert!((c.params(10.0).unwrap().gamma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ExperimentConfig::parse("colour = red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(ExperimentConfig::parse("seed = 1\nseed = 2"), Err(ConfigError::Duplicate(_))));
        assert!(matches!(ExperimentConfig::parse("seed 1"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("samples = 0"), Err(ConfigError::Value { .. })));
        assert!(matches!(ExperimentConfig::parse("step = -1"), Err(ConfigError::Value { .. })));
        assert!(matches!(ExperimentConfig::parse("level = 1.5"), Err(ConfigError::Value { .. })));
        let both = ExperimentConfig::parse("experiment = area-law\ngamma = 1\nkappa = 16").unwrap();
        assert_eq!(both.validate(), Err(ConfigError::BothGammaKappa));
        let unknown = ExperimentConfig::parse("experiment = nope").unwrap();
        assert!(matches!(unknown.validate(), Err(ConfigError::UnknownExperiment(_))));
        assert_eq!(ExperimentConfig::default().validate(), Err(ConfigError::MissingExperiment));
        let bad_gamma = ExperimentConfig::parse("experiment = area-law\ngamma = 2.5").unwrap();
        assert!(matches!(bad_gamma.validate(), Err(ConfigError::Invalid(_))));
        let slow_curve = ExperimentConfig::parse("experiment = reversibility\nkappa = 6").unwrap();
        assert!(matches!(slow_curve.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut c = ExperimentConfig::parse("experiment = crt-covariance\nseed = 3").unwrap();
        c.set("seed", "9").unwrap();
        assert_eq!(c.seed(), 9);
        assert_eq!(c.out_dir(), PathBuf::from("results/crt-covariance"));
    }

    proptest! {
        #[test]
        fn parser_never_panics(s in "\\PC{0,200}") {
            let _ = ExperimentConfig::parse(&s);
        }

        #[test]
        fn numeric_round_trip(seed in any::<u64>(), n in 1usize..1_000_000, k in 0.5f64..100.0) {
            let text = format!("experiment = crt-covariance\nseed = {seed}\nsamples = {n}\nkappa = {k}\n");
            let c = ExperimentConfig::parse(&text).unwrap();
            prop_assert_eq!(c.seed(), seed);
            prop_assert_eq!(c.samples, Some(n));
            prop_assert_eq!(c.kappa, Some(k));
        }
    }
}
