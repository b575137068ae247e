use slelab_cli::ResultsFile;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab")).args(args).env("RAYON_NUM_THREADS", threads).env_remove("LAB_HEAVY").output().expect("run lab")
}

fn results(dir: &Path) -> ResultsFile {
    ResultsFile::from_json(&std::fs::read_to_string(dir.join("results.json")).unwrap()).unwrap()
}

/// results.json without the timestamp and output directory lines.
fn stripped(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("results.json")).unwrap();
    text.lines().filter(|l| !l.trim_start().starts_with("\"timestamp\"") && !l.trim_start().starts_with("\"out\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn same_seed_gives_identical_results() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, threads) in [(&a, "1"), (&b, "1"), (&c, "3")] {
        let out = lab(&["run", "--experiment", "sphere-mot", "--samples", "300", "--seed", "5", "--out", dir.to_str().unwrap()], threads);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(stripped(&a), stripped(&b));
    assert_eq!(stripped(&a), stripped(&c), "worker count changed the results");
    let r = results(&a);
    assert_eq!(r.experiment, "sphere-mot");
    for f in &r.artifacts {
        assert!(a.join(f).exists(), "missing artifact {f}");
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn config_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("crt.cfg");
    let out_dir = tmp.path().join("out");
    std::fs::write(&cfg, format!("# small run\nexperiment = crt-covariance\ngamma = 1\nsamples = 50000\nout = {}\n", out_dir.display())).unwrap();
    let v = lab(&["validate", "--config", cfg.to_str().unwrap()], "1");
    assert!(v.status.success());
    let out = lab(&["run", "--config", cfg.to_str().unwrap(), "--kappa", "12", "--seed", "2"], "1");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = results(&out_dir);
    assert_eq!(r.params.kappa, 12.0);
    assert_eq!(r.config.seed, Some(2));
    assert!(r.passed && r.reports.iter().all(|t| t.is_consistent()));
    assert!(r.artifacts.contains(&"increments.csv".to_string()) && r.artifacts.contains(&"covariance_scatter.svg".to_string()));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |s: &str| tmp.path().join(s).to_str().unwrap().to_string();
    // config errors
    assert_eq!(lab(&["run", "--experiment", "nope"], "1").status.code(), Some(2));
    assert_eq!(lab(&["run", "--experiment", "crt-covariance", "--set", "colour=red"], "1").status.code(), Some(2));
    assert_eq!(lab(&["run", "--experiment", "reversibility", "--kappa", "6"], "1").status.code(), Some(2));
    let bad = tmp.path().join("bad.cfg");
    std::fs::write(&bad, "experiment = crt-covariance\nseed = 1\nseed = 2\n").unwrap();
    assert_eq!(lab(&["validate", "--config", bad.to_str().unwrap()], "1").status.code(), Some(2));
    // too few samples for a 3% tolerance
    let fail = lab(&["run", "--experiment", "crt-covariance", "--samples", "20", "--out", &d("fail")], "1");
    assert_eq!(fail.status.code(), Some(1));
    assert!(!results(&tmp.path().join("fail")).passed);
    // censoring beyond 5% aborts with a diagnostic
    let cens = lab(
        &["run", "--experiment", "reversibility", "--samples", "20", "--set", "horizon=0.01", "--set", "step=1e-3", "--out", &d("cens")],
        "1",
    );
    assert_eq!(cens.status.code(), Some(3), "{}", String::from_utf8_lossy(&cens.stderr));
    assert!(String::from_utf8_lossy(&cens.stderr).contains("censored"));
}

#[test]
fn list_names_every_experiment() {
    let out = lab(&["list"], "1");
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for e in slelab_cli::catalog::CATALOG {
        assert!(text.contains(e.name));
    }
}
