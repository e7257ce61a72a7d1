//! Command-line front end: train/evaluate slicing policies, debug the inner
//! solver, validate the queueing model, and generate synthetic traces.
//!
//! On failure the process exits nonzero and prints a single JSON object
//! (`{"error": ..., "kind": ...}`) to stderr.

use clap::{Args, Parser, Subcommand};
use ranslice::config::ExperimentConfig;
use ranslice::harness;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ranslice", version, about = "Dynamic RAN slicing simulator and learner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config algorithm: raws|ddpg|td3|raws-wo|random.
    #[arg(long)]
    algo: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(algo) = &self.algo {
            cfg.algorithm = algo.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy; writes checkpoint, learning curve, config snapshot.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run directory for artifacts.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on its held-out days, next to the random
    /// baseline (and any extra checkpoints) on identical windows.
    Evaluate {
        /// Checkpoint produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory for windows.csv and plot CSVs.
        #[arg(long)]
        out: PathBuf,
        /// Additional checkpoints to run side by side.
        #[arg(long)]
        compare: Vec<PathBuf>,
        /// Evaluate on this trace CSV instead of the configured trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Solve one workload-distribution instance from a JSON dump
    /// (path or `-` for stdin) and print the solution.
    SolveInner {
        instance: String,
    },
    /// Print an analytic-vs-simulated M/M/1 sojourn comparison table.
    ValidateQueueing {
        #[arg(long, default_value_t = 1_000_000)]
        arrivals: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Generate the configured synthetic trace as CSV.
    GenTrace {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { config, out } => {
            let cfg = config.load()?;
            let artifacts = harness::cli_train(&cfg, &out)?;
            let last = artifacts.episodes.last();
            println!(
                "trained algorithm={} episodes={} final_mean_cost={:.3}",
                cfg.algorithm,
                artifacts.episodes.len(),
                last.map_or(f64::NAN, |e| e.mean_cost)
            );
            println!("checkpoint: {}", artifacts.checkpoint_path.display());
            println!("curve:      {}", artifacts.curve_path.display());
        }
        Command::Evaluate {
            checkpoint,
            out,
            compare,
            trace,
        } => {
            let report = harness::cli_evaluate(&checkpoint, &out, &compare, trace.as_deref())?;
            println!(
                "{:<10} {:>8} {:>14} {:>12} {:>12}",
                "policy", "windows", "mean_cost/day", "viol_prob", "mean_delay_s"
            );
            for a in &report.aggregates {
                println!(
                    "{:<10} {:>8} {:>14.2} {:>12.4} {:>12.5}",
                    a.policy, a.windows, a.mean_daily_cost, a.violation_probability, a.mean_delay_s
                );
            }
            println!("records: {}", out.join("windows.csv").display());
        }
        Command::SolveInner { instance } => {
            let text = if instance == "-" {
                use std::io::Read;
                let mut buf = String::new();
                std::io::stdin().read_to_string(&mut buf)?;
                buf
            } else {
                std::fs::read_to_string(&instance)?
            };
            println!("{}", harness::solve_inner_json(&text)?);
        }
        Command::ValidateQueueing { arrivals, seed } => {
            let rows = harness::validate_queueing(arrivals, seed)?;
            println!(
                "{:>8} {:>8} {:>12} {:>12} {:>12} {:>10}",
                "lambda", "mu", "analytic_s", "simulated_s", "ci_half_s", "rel_err"
            );
            for r in rows {
                println!(
                    "{:>8.2} {:>8.2} {:>12.6} {:>12.6} {:>12.6} {:>9.4}%",
                    r.arrival_rate,
                    r.service_rate,
                    r.analytic_s,
                    r.simulated_s,
                    r.halfwidth_s,
                    100.0 * r.relative_error
                );
            }
        }
        Command::GenTrace { config, out } => {
            let cfg = config.load()?;
            harness::gen_trace(&cfg, &out)?;
            println!("trace: {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        let kind = match err.downcast_ref::<ranslice::Error>() {
            Some(e) => format!("{e:?}")
                .split(&['{', '('][..])
                .next()
                .unwrap_or("Error")
                .trim()
                .to_string(),
            None => "Error".to_string(),
        };
        eprintln!(
            "{}",
            serde_json::json!({ "error": err.to_string(), "kind": kind })
        );
        std::process::exit(1);
    }
}
