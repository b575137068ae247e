//! results.json, CSV tables and SVG plots of one run.

use crate::catalog::Entry;
use crate::config::ExperimentConfig;
use crate::experiments::Outcome;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use slelab_core::stats::TestReport;
use slelab_core::LqgParams;
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// LQG constants echoed into every result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEcho {
    pub gamma: f64,
    pub kappa: f64,
    pub q: f64,
    pub a_sq: f64,
    pub corr: f64,
    pub theta: f64,
    pub sum_variance: f64,
    pub diff_variance: f64,
    pub first_passage_scale: f64,
}

impl From<&LqgParams> for ParamEcho {
    fn from(p: &LqgParams) -> Self {
        ParamEcho {
            gamma: p.gamma,
            kappa: p.kappa,
            q: p.q,
            a_sq: p.a_sq,
            corr: p.corr,
            theta: p.theta(),
            sum_variance: p.sum_variance(),
            diff_variance: p.diff_variance(),
            first_passage_scale: p.first_passage_scale(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub experiment: String,
    pub criterion: u8,
    pub params: ParamEcho,
    pub config: ExperimentConfig,
    pub heavy: bool,
    pub passed: bool,
    pub reports: Vec<TestReport>,
    pub diagnostics: Vec<TestReport>,
    pub summary: BTreeMap<String, Value>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub timestamp: u64,
}

impl ResultsFile {
    pub fn new(entry: &Entry, params: &LqgParams, cfg: &ExperimentConfig, heavy: bool, outcome: &Outcome) -> Self {
        let mut artifacts: Vec<String> = outcome.tables.iter().map(|(n, _)| format!("{n}.csv")).collect();
        artifacts.extend(outcome.plots.iter().map(|p| format!("{}.svg", p.name)));
        ResultsFile {
            experiment: entry.name.to_string(),
            criterion: entry.criterion,
            params: params.into(),
            config: cfg.clone(),
            heavy,
            passed: outcome.passed(),
            reports: outcome.reports.clone(),
            diagnostics: outcome.diagnostics.clone(),
            summary: outcome.summary.clone(),
            artifacts,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// Write results.json, the tables and the plots into `dir`; returns the
/// path of results.json.
pub fn write_all(dir: &Path, results: &ResultsFile, outcome: &Outcome) -> io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    for (name, csv) in &outcome.tables {
        std::fs::write(dir.join(format!("{name}.csv")), csv)?;
    }
    let cfg = &results.config;
    for plot in &outcome.plots {
        let mut p = plot.clone();
        let mut prov = vec![
            ("experiment".to_string(), results.experiment.clone()),
            ("criterion".to_string(), results.criterion.to_string()),
            ("gamma".to_string(), format!("{}", results.params.gamma)),
            ("kappa".to_string(), format!("{}", results.params.kappa)),
            ("seed".to_string(), cfg.seed().to_string()),
        ];
        if let Some(n) = cfg.samples {
            prov.push(("samples".to_string(), n.to_string()));
        }
        prov.push(("data".to_string(), outcome.tables.iter().map(|t| format!("{}.csv", t.0)).collect::<Vec<_>>().join(", ")));
        prov.append(&mut p.provenance);
        p.provenance = prov;
        std::fs::write(dir.join(format!("{}.svg", p.name)), p.render())?;
    }
    let path = dir.join("results.json");
    std::fs::write(&path, results.to_json())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::svg::{Plot, Series, Style};

    fn outcome() -> Outcome {
        let mut o = Outcome::default();
        o.reports.push(TestReport::new("t", 0.1, 0.2, 0.01, 10));
        o.put("x", 1.5);
        o.tables.push(("data".into(), "a,b\n1,2\n".into()));
        o.plots.push(Plot::new("fig", "t", "x", "y").with(Series::new("s", vec![(0.0, 1.0), (1.0, 2.0)], Style::Line)));
        o
    }

    #[test]
    fn round_trips_and_writes_artifacts() {
        let entry = catalog::find("crt-covariance").unwrap();
        let p = LqgParams::from_kappa(16.0).unwrap();
        let cfg = ExperimentConfig::parse("experiment = crt-covariance\nseed = 4").unwrap();
        let o = outcome();
        let r = ResultsFile::new(entry, &p, &cfg, false, &o);
        assert!(r.passed);
        assert_eq!(r.artifacts, vec!["data.csv", "fig.svg"]);
        assert_eq!(ResultsFile::from_json(&r.to_json()).unwrap(), r);
        let dir = tempfile::tempdir().unwrap();
        let path = write_all(dir.path(), &r, &o).unwrap();
        assert!(path.ends_with("results.json"));
        let svg = std::fs::read_to_string(dir.path().join("fig.svg")).unwrap();
        assert!(svg.contains("experiment: crt-covariance") && svg.contains("seed: 4") && svg.contains("data: data.csv"));
        assert_eq!(std::fs::read_to_string(dir.path().join("data.csv")).unwrap(), "a,b\n1,2\n");
    }
}
