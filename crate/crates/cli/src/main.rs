use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use axl_core::config::{ExperimentKind, ScenarioConfig};
use axl_core::harness::{run_scenario, write_files, Report};
use axl_core::verify::verify_maps;
use axl_core::Error;
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const MAP_TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "axl", version, about = "Simulate augmented exponential learning in MIMO-OFDM cognitive radio networks")]
struct Cli {
    /// Overrides `rng_seed` from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a dynamic regret or tracking scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the static multiple-access channel efficiency experiment.
    StaticMac {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the choice maps against direct numerical maximisation.
    VerifyMaps {
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
}

/// Failure with a dedicated exit code.
#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Violation(String),
}

fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::from_toml_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn run_to(cfg: &ScenarioConfig, out: &Path) -> anyhow::Result<()> {
    let started = Instant::now();
    let report = run_scenario(cfg).map_err(|e| match e {
        Error::Config { .. } => Failure::Config(e.to_string()).into(),
        other => anyhow::Error::new(other),
    })?;
    let files = report.files(cfg)?;
    write_files(&files, out).with_context(|| format!("writing results to {}", out.display()))?;
    for f in &files {
        println!("wrote {}", out.join(f.name).display());
    }
    summarize(&report);
    println!("finished in {:.2?}", started.elapsed());
    let violations = report.violations();
    if let Some(v) = violations.first() {
        return Err(Failure::Violation(format!(
            "{} regret-bound violations; first: user {} epoch {} benchmark {}: {:e} > {:e}",
            violations.len(),
            v.user,
            v.epoch + 1,
            v.benchmark,
            v.avg_regret,
            v.bound
        ))
        .into());
    }
    Ok(())
}

fn summarize(report: &Report) {
    match report {
        Report::Regret(r) => {
            for (s, u) in r.users.iter().enumerate() {
                if let Some(last) = u.avg_regret.len().checked_sub(1) {
                    println!(
                        "user {s}: max average regret {:.6} nats, bound {:.6} (M = {:.4})",
                        u.max_regret(last),
                        u.bound[last],
                        u.gradient_bound
                    );
                }
            }
        }
        Report::Tracking(r) => println!("{} tracking rows", r.rows.len()),
        Report::StaticMac(r) => {
            println!("sum capacity {:.6} nats (gap {:.1e}), floor {:.6} over {} points", r.capacity, r.capacity_gap, r.psi_min, r.vertex_samples);
            for (run, eff) in r.runs.iter().zip(&r.efficiency) {
                if let Some(e) = eff.efficiency.last() {
                    let noise = if run.noisy { "noisy" } else { "perfect" };
                    println!("{} ({noise}): final efficiency {e:.6}", run.policy.name());
                }
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load(&config, cli.seed)?;
            if cfg.kind == ExperimentKind::StaticMac {
                return Err(Failure::Config(format!(
                    "{}: kind = \"static-mac\" runs under the `static-mac` subcommand",
                    config.display()
                ))
                .into());
            }
            run_to(&cfg, &out)
        }
        Command::StaticMac { config, out } => {
            let mut cfg = load(&config, cli.seed)?;
            cfg.kind = ExperimentKind::StaticMac;
            run_to(&cfg, &out)
        }
        Command::VerifyMaps { instances } => {
            let started = Instant::now();
            let r = verify_maps(instances, cli.seed.unwrap_or(0))?;
            println!("instances        {}", r.instances);
            println!("gibbs            {:e}", r.gibbs);
            println!("capped gibbs     {:e}", r.capped);
            println!("matrix gibbs     {:e}", r.matrix);
            println!("lambda residual  {:e}", r.lambda_residual);
            println!("finished in {:.2?}", started.elapsed());
            if !(r.max() < MAP_TOLERANCE) {
                return Err(Failure::Violation(format!("max deviation {:e} is not below {MAP_TOLERANCE:e}", r.max())).into());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Failure>() {
                Some(Failure::Config(_)) => ExitCode::from(EXIT_CONFIG),
                Some(Failure::Violation(_)) => ExitCode::from(EXIT_VIOLATION),
                None => ExitCode::FAILURE,
            }
        }
    }
}
