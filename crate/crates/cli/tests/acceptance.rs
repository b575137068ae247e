//! Acceptance run: one catalog experiment per criterion at its default
//! scale, one PASS/FAIL line each. Criterion 7 runs at full scale only with
//! LAB_HEAVY=1; otherwise its reduced run is reported and not counted.

use slelab_cli::{catalog, heavy_from_env, run_experiment, ExperimentConfig, RunResult};
use slelab_core::stats::TestReport;
use std::process::ExitCode;
use std::time::Instant;

fn describe(r: &TestReport) -> String {
    let v = r.metadata.get("value").map(|v| format!(" value {v}")).unwrap_or_default();
    format!("{}: {:.4e} vs {:.4e}{v}", r.name, r.statistic, r.critical_value)
}

/// Report closest to failing (largest statistic / critical ratio).
fn tightest(reports: &[TestReport]) -> Option<&TestReport> {
    let margin = |r: &TestReport| if r.passed() { r.critical_value - r.statistic } else { f64::NEG_INFINITY };
    reports.iter().min_by(|a, b| {
        let (ma, mb) = (margin(a) / a.critical_value.abs().max(1e-300), margin(b) / b.critical_value.abs().max(1e-300));
        ma.total_cmp(&mb)
    })
}

fn extra(r: &RunResult) -> String {
    let s = &r.results.summary;
    let get = |k: &str| s.get(k).map(|v| v.to_string()).unwrap_or_default();
    match r.results.criterion {
        1 => format!("order {}, errors {}, log-scheme error {}", get("order"), get("max_error"), get("log_scheme_max_error")),
        5 => format!("b* {}, distances (candidate, b, KS) {}", get("b_star"), get("candidate_distances")),
        6 => format!("b* {}, tan/cot KS {}/{}, censored {}", get("b_star"), r.results.diagnostics[0].statistic, r.results.diagnostics[1].statistic, get("censored")),
        7 => format!(
            "scale {}, Var(dX)/a^2 {}, Var(dY)/a^2 {}, corr {} (target {}), identity {}",
            get("scale"),
            get("var_x_over_a2"),
            get("var_y_over_a2"),
            get("corr"),
            get("target_corr"),
            get("identity_error")
        ),
        8 => format!("p1 {}, p2 {}", get("p1"), get("p2")),
        9 => format!("distances {}", get("distances")),
        10 => format!("QV ratio {} (target {}), min duration {}", get("qv_ratio"), get("target_ratio"), get("min_duration")),
        _ => String::new(),
    }
}

fn main() -> ExitCode {
    // libtest flags such as --list or a name filter are not used here
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let heavy = heavy_from_env();
    let out = tempfile::tempdir().expect("temp dir");
    let mut failed = Vec::new();
    println!("acceptance: {} criteria{}", catalog::CATALOG.len(), if heavy { " (heavy)" } else { "" });
    for c in 1..=10u8 {
        let entry = catalog::by_criterion(c).expect("catalog covers every criterion");
        let mut cfg = ExperimentConfig::default();
        cfg.experiment = Some(entry.name.to_string());
        cfg.out = Some(out.path().join(entry.name));
        let t = Instant::now();
        let res = run_experiment(&cfg);
        let secs = t.elapsed().as_secs_f64();
        let gated = !entry.heavy || heavy;
        match res {
            Ok(r) => {
                let ok = r.results.passed;
                let n = r.results.reports.len();
                let npass = r.results.reports.iter().filter(|t| t.passed()).count();
                let verdict = match (ok, gated) {
                    (true, true) => "PASS",
                    (false, true) => "FAIL",
                    (true, false) => "PASS (reduced, not counted)",
                    (false, false) => "FAIL (reduced, not counted)",
                };
                println!(
                    "criterion {c:>2} {:<22} {verdict}  {npass}/{n} tests; tightest {}; {} [{secs:.1} s]",
                    entry.name,
                    tightest(&r.results.reports).map(describe).unwrap_or_default(),
                    extra(&r)
                );
                for t in r.results.reports.iter().filter(|t| !t.passed()) {
                    println!("    failed: {}", describe(t));
                }
                if !ok && gated {
                    failed.push(c);
                }
            }
            Err(e) => {
                println!("criterion {c:>2} {:<22} FAIL  error: {e} [{secs:.1} s]", entry.name);
                if gated {
                    failed.push(c);
                }
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all gated criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
