use clap::{Parser, Subcommand};
use slelab_cli::{catalog, run_experiment, ConfigError, ExperimentConfig, RunError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lab", about = "Run SLE / LQG experiments", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write results.json, CSVs and SVG plots.
    Run {
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        kappa: Option<String>,
        #[arg(long)]
        gamma: Option<String>,
        #[arg(long)]
        samples: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<String>,
        /// Full scale for heavy experiments.
        #[arg(long)]
        heavy: bool,
        /// Any other config key, as key=value.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Print the experiment catalog.
    List,
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig, RunError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))?;
            Ok(ExperimentConfig::parse(&text)?)
        }
    }
}

fn run(cmd: Cmd) -> Result<i32, RunError> {
    match cmd {
        Cmd::List => {
            for e in catalog::CATALOG {
                println!("{:<22} criterion {:>2}{}  {}", e.name, e.criterion, if e.heavy { " (heavy)" } else { "" }, e.summary);
            }
            Ok(0)
        }
        Cmd::Validate { config } => {
            let cfg = load(Some(&config))?;
            cfg.validate()?;
            println!("{}: ok ({})", config.display(), cfg.name());
            Ok(0)
        }
        Cmd::Run { experiment, config, kappa, gamma, samples, seed, out, heavy, set } => {
            let mut cfg = load(config.as_deref())?;
            // a command-line gamma or kappa replaces either one from the file
            if kappa.is_some() || gamma.is_some() {
                cfg.kappa = None;
                cfg.gamma = None;
            }
            let named = [("experiment", experiment), ("kappa", kappa), ("gamma", gamma), ("samples", samples), ("seed", seed), ("out", out)];
            for (k, v) in named {
                if let Some(v) = v {
                    cfg.set(k, &v)?;
                }
            }
            for kv in &set {
                let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Invalid(format!("--set expects key=value, got `{kv}`")))?;
                cfg.set(k.trim(), v.trim())?;
            }
            if heavy {
                cfg.heavy = Some(true);
            }
            let r = run_experiment(&cfg)?;
            for rep in r.results.reports.iter() {
                println!("{} {} (statistic {:.6}, critical {:.6})", if rep.passed() { "PASS" } else { "FAIL" }, rep.name, rep.statistic, rep.critical_value);
            }
            for rep in r.results.diagnostics.iter() {
                println!("info {} (statistic {:.6}, critical {:.6})", rep.name, rep.statistic, rep.critical_value);
            }
            println!("results: {}", r.dir.join("results.json").display());
            Ok(r.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
