//! Experiment runner: named, reproducible experiments over `slelab-core`.

pub mod catalog;
pub mod config;
pub mod experiments;
pub mod output;
pub mod svg;

pub use config::{ConfigError, ExperimentConfig};
pub use experiments::{reversibility_statistic, InversionMap, Outcome, ProportionRow};
pub use output::ResultsFile;

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(#[from] slelab_core::Error),
    #[error("writing results: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Runtime(_) | RunError::Io(_) => 3,
        }
    }
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub results: ResultsFile,
    pub outcome: Outcome,
    pub dir: PathBuf,
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        if self.results.passed {
            0
        } else {
            1
        }
    }
}

/// LAB_HEAVY=1 (or true) turns on full-scale heavy experiments.
pub fn heavy_from_env() -> bool {
    std::env::var("LAB_HEAVY").is_ok_and(|v| v == "1" || v.eq_ignore_ascii_case("true"))
}

/// Run an experiment without writing anything.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<(Outcome, bool), RunError> {
    cfg.validate()?;
    let entry = catalog::find(cfg.name()).expect("validated");
    let params = cfg.params(entry.default_kappa)?;
    let heavy = cfg.heavy() || heavy_from_env();
    let ctx = experiments::Ctx { cfg, entry, params, heavy };
    Ok((experiments::dispatch(&ctx)?, heavy))
}

/// Run an experiment and write its results under `cfg.out_dir()`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult, RunError> {
    let (outcome, heavy) = evaluate(cfg)?;
    let entry = catalog::find(cfg.name()).expect("validated");
    let params = cfg.params(entry.default_kappa)?;
    let results = ResultsFile::new(entry, &params, cfg, heavy, &outcome);
    let dir = cfg.out_dir();
    output::write_all(&dir, &results, &outcome)?;
    Ok(RunResult { results, outcome, dir })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::Config(ConfigError::MissingExperiment).exit_code(), 2);
        assert_eq!(RunError::Runtime(slelab_core::Error::Singular).exit_code(), 3);
        let bad = ExperimentConfig::parse("experiment = nope").unwrap();
        assert_eq!(evaluate(&bad).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn small_crt_run_passes_through() {
        let cfg = ExperimentConfig::parse("experiment = crt-covariance\nsamples = 2000\nseed = 3").unwrap();
        let (o, _) = evaluate(&cfg).unwrap();
        assert_eq!(o.reports.len(), 5);
        assert!(o.summary.contains_key("estimate"));
    }
}
