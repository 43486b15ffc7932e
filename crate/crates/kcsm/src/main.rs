use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kcsm::config::{estimate_resources, ExperimentConfig, ExperimentKind};
use kcsm::experiments::run_experiment;
use kcsm::output::write_artifacts;

#[derive(Parser)]
#[command(name = "kcsm", version, about = "Batch experiments for kinetically constrained spin models with a tracer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 uses all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Output directory; defaults to `output` from the configuration,
        /// then `kcsm-out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration and project its cost without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the experiment kinds.
    ListExperiments,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<20} {}", format!("{k:?}"), k.describe());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let result = ExperimentConfig::load(&config).and_then(|c| estimate_resources(&c).map(|r| (c, r)));
            match result {
                Ok((c, r)) => {
                    println!("ok: {:?} on {}", c.kind, c.model);
                    println!("largest exact state space: {}", r.max_states);
                    println!("expected events: {:.3e}", r.events);
                    println!("projected runtime: {:.1} s (single thread)", r.projected_seconds);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Run { config, seed, jobs, out } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let outcome = match run_experiment(&cfg, jobs) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("kcsm-out"));
            match write_artifacts(&dir, &cfg, &outcome) {
                Ok(files) => {
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            for a in &outcome.assertions {
                println!("[{}] {}: {}", if a.passed { "pass" } else { "FAIL" }, a.name, a.detail);
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
