//! Run orchestration behind the CLI: training runs with reproducible run
//! directories, held-out evaluation with side-by-side baselines, checkpoint
//! save/load, the queueing validation table, and trace generation.
//!
//! A run directory always contains `config.toml` (the exact snapshot,
//! including the seed), so any run can be reproduced from its own artifacts.

use crate::config::ExperimentConfig;
use crate::env::{EnvAction, SliceEnv, SplitPolicy};
use crate::error::{Error, Result};
use crate::inner::{solve_delay_sensitive, solve_delay_tolerant, InnerInstance, InnerSolution};
use crate::learner::{random_policy, train, Agent, Algorithm, EpisodeStats};
use crate::nn::Mlp;
use crate::oracle::simulate_mm1;
use crate::report::{
    emit_plot_data, write_learning_curve, write_window_records, EvaluationReport, WindowRecord,
};
use crate::service::transmission_rates;
use crate::traffic::{load_trace_csv, write_trace_csv, TrafficWindow};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized training artifact: every network plus the exact configuration
/// it was trained under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub algorithm: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub split_dim: usize,
    pub config: ExperimentConfig,
    /// Absent for the random baseline.
    pub actor: Option<Mlp>,
    pub actor_target: Option<Mlp>,
    pub critics: Vec<Mlp>,
    pub critic_targets: Vec<Mlp>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let cp: Checkpoint = serde_json::from_slice(&bytes)?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint version {} (expected {})",
                cp.version, CHECKPOINT_VERSION
            )));
        }
        cp.config.validate()?;
        Ok(cp)
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        Algorithm::parse(&self.algorithm)
    }

    /// Rebuild the frozen agent for evaluation.
    pub fn agent(&self) -> Option<Agent> {
        let actor = self.actor.clone()?;
        let actor_target = self.actor_target.clone().unwrap_or_else(|| actor.clone());
        Some(Agent::from_parts(
            actor,
            actor_target,
            self.critics.clone(),
            self.critic_targets.clone(),
            self.config.learner.clone(),
            self.critics.len() > 1,
            self.state_dim,
            self.action_dim,
        ))
    }
}

pub struct TrainArtifacts {
    pub checkpoint_path: PathBuf,
    pub curve_path: PathBuf,
    pub config_path: PathBuf,
    pub episodes: Vec<EpisodeStats>,
}

fn build_env(config: &ExperimentConfig, split_policy: SplitPolicy) -> Result<(SliceEnv, Arc<Vec<TrafficWindow>>)> {
    let topology = config.topology.build()?;
    let rates = transmission_rates(&config.radio, &topology);
    let trace = Arc::new(config.build_trace(&topology)?);
    let env = SliceEnv::new(config.env_setup(topology, rates), trace.clone(), split_policy)?;
    Ok((env, trace))
}

/// Train per the config and write checkpoint, learning curve, and config
/// snapshot into `out_dir`.
pub fn cli_train(config: &ExperimentConfig, out_dir: &Path) -> Result<TrainArtifacts> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let algorithm = config.algorithm();
    let (mut env, _) = build_env(config, algorithm.split_policy())?;
    let (train_pool, _) = config.day_split(env.trace_len());
    let result = train(&mut env, &config.learner, algorithm, config.seed, &train_pool)?;

    let config_path = out_dir.join("config.toml");
    std::fs::write(&config_path, config.to_toml_string())?;
    let curve_path = out_dir.join("learning_curve.csv");
    write_learning_curve(&curve_path, &result.episodes)?;

    let checkpoint = match &result.agent {
        Some(agent) => Checkpoint {
            version: CHECKPOINT_VERSION,
            algorithm: algorithm.name().into(),
            state_dim: env.state_dim(),
            action_dim: env.action_dim(),
            split_dim: env.split_flat_dim(),
            config: config.clone(),
            actor: Some(agent.actor.clone()),
            actor_target: Some(agent.actor_target.clone()),
            critics: agent.critics.clone(),
            critic_targets: agent.critic_targets.clone(),
        },
        None => Checkpoint {
            version: CHECKPOINT_VERSION,
            algorithm: algorithm.name().into(),
            state_dim: env.state_dim(),
            action_dim: env.action_dim(),
            split_dim: env.split_flat_dim(),
            config: config.clone(),
            actor: None,
            actor_target: None,
            critics: vec![],
            critic_targets: vec![],
        },
    };
    let checkpoint_path = out_dir.join("checkpoint.json");
    checkpoint.save(&checkpoint_path)?;

    Ok(TrainArtifacts {
        checkpoint_path,
        curve_path,
        config_path,
        episodes: result.episodes,
    })
}

/// Roll one frozen policy over every start in `starts`, producing records.
fn rollout_policy(
    env: &mut SliceEnv,
    agent: Option<&Agent>,
    policy_name: &str,
    starts: &[usize],
    windows_per_day: usize,
    random_seed: u64,
) -> Result<Vec<WindowRecord>> {
    let n_bs = env.setup.topology.num_bs();
    let n_over = env.setup.topology.num_overlapped();
    let mut rng = ChaCha20Rng::seed_from_u64(random_seed);
    let mut records = Vec::with_capacity(starts.len() * windows_per_day);
    for (day, &start) in starts.iter().enumerate() {
        let mut state = env.reset(start)?;
        for w in 0..windows_per_day {
            let action = match agent {
                Some(a) => EnvAction {
                    // Frozen policy: no exploration noise.
                    fractions: a.act(&state, 0.0, &mut rng),
                    split_override: None,
                },
                None => random_policy(n_bs, n_over, &mut rng),
            };
            let out = env.step(&action)?;
            records.push(WindowRecord {
                policy: policy_name.into(),
                day,
                window_in_day: w,
                window_index: out.info.window_index,
                reward: out.reward,
                delay_s: out.info.delay_s,
                feasible_u: out.info.feasible[crate::SENSITIVE],
                feasible_e: out.info.feasible[crate::TOLERANT],
                violated: out.info.violated,
                operation: out.info.cost.operation,
                reconfiguration: out.info.cost.reconfiguration,
                violation: out.info.cost.violation,
                revenue: out.info.cost.revenue,
                total: out.info.total_cost,
            });
            state = out.next_state;
        }
    }
    Ok(records)
}

/// Evaluate a checkpoint on the held-out part of its trace, alongside the
/// random baseline (identical windows and seed) and any extra checkpoints.
/// Writes `windows.csv` and the plot CSVs into `out_dir`.
pub fn cli_evaluate(
    checkpoint_path: &Path,
    out_dir: &Path,
    compare: &[PathBuf],
    trace_override_csv: Option<&Path>,
) -> Result<EvaluationReport> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let config = &checkpoint.config;
    std::fs::create_dir_all(out_dir)?;

    let topology = config.topology.build()?;
    let rates = transmission_rates(&config.radio, &topology);
    let trace = Arc::new(match trace_override_csv {
        Some(path) => load_trace_csv(path, &config.flow, topology.num_zones)?,
        None => config.build_trace(&topology)?,
    });
    let (_, eval_pool) = config.day_split(trace.len());
    let wpd = config.windows_per_day();
    let random_seed = config.seed ^ 0x5eed_ba5e;

    let mut records = Vec::new();
    let run_checkpoint = |cp: &Checkpoint, records: &mut Vec<WindowRecord>| -> Result<()> {
        let algorithm = cp.algorithm()?;
        let setup = config.env_setup(topology.clone(), rates.clone());
        let mut env = SliceEnv::new(setup, trace.clone(), algorithm.split_policy())?;
        if env.state_dim() != cp.state_dim
            || env.action_dim() != cp.action_dim
            || env.split_flat_dim() != cp.split_dim
        {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint dims ({}, {}, {}) do not fit the configured topology ({}, {}, {})",
                cp.state_dim,
                cp.action_dim,
                cp.split_dim,
                env.state_dim(),
                env.action_dim(),
                env.split_flat_dim()
            )));
        }
        let agent = cp.agent();
        if agent.is_none() && algorithm.is_learning() {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint for '{}' carries no networks",
                cp.algorithm
            )));
        }
        let rows = rollout_policy(
            &mut env,
            agent.as_ref(),
            algorithm.name(),
            &eval_pool,
            wpd,
            random_seed,
        )?;
        records.extend(rows);
        Ok(())
    };

    run_checkpoint(&checkpoint, &mut records)?;
    for extra in compare {
        let cp = Checkpoint::load(extra)?;
        run_checkpoint(&cp, &mut records)?;
    }
    // Random baseline on the identical windows, unless already present.
    if !records.iter().any(|r| r.policy == "random") {
        let setup = config.env_setup(topology.clone(), rates.clone());
        let mut env = SliceEnv::new(setup, trace.clone(), SplitPolicy::EqualSplit)?;
        let rows = rollout_policy(&mut env, None, "random", &eval_pool, wpd, random_seed)?;
        records.extend(rows);
    }

    let report = EvaluationReport::from_records(records, wpd);
    write_window_records(&out_dir.join("windows.csv"), &report.records)?;
    emit_plot_data(&report, out_dir)?;
    std::fs::write(
        out_dir.join("aggregates.json"),
        serde_json::to_vec_pretty(&report.aggregates)?,
    )?;
    Ok(report)
}

/// One row of the queueing validation table.
#[derive(Debug, Clone, Serialize)]
pub struct QueueValidationRow {
    pub arrival_rate: f64,
    pub service_rate: f64,
    pub analytic_s: f64,
    pub simulated_s: f64,
    pub halfwidth_s: f64,
    pub relative_error: f64,
}

/// Analytic-vs-simulated sojourn comparison across utilizations.
pub fn validate_queueing(num_arrivals: usize, seed: u64) -> Result<Vec<QueueValidationRow>> {
    let cases = [
        (2.0, 20.0),
        (10.0, 20.0),
        (14.0, 20.0),
        (18.0, 20.0),
        (19.0, 20.0),
    ];
    cases
        .iter()
        .enumerate()
        .map(|(i, &(lambda, mu))| {
            let sim = simulate_mm1(lambda, mu, num_arrivals, seed.wrapping_add(i as u64))?;
            let analytic = 1.0 / (mu - lambda);
            Ok(QueueValidationRow {
                arrival_rate: lambda,
                service_rate: mu,
                analytic_s: analytic,
                simulated_s: sim.mean_sojourn_s,
                halfwidth_s: sim.confidence_halfwidth_s,
                relative_error: (sim.mean_sojourn_s - analytic).abs() / analytic,
            })
        })
        .collect()
}

/// Solve an instance dumped as JSON; returns the solution as JSON.
pub fn solve_inner_json(input: &str) -> Result<String> {
    let instance: InnerInstance = serde_json::from_str(input)?;
    let solution: InnerSolution = if instance.delay_sensitive {
        solve_delay_sensitive(&instance)?
    } else {
        solve_delay_tolerant(&instance)
    };
    Ok(serde_json::to_string_pretty(&solution)?)
}

/// Generate the configured synthetic trace and write it as CSV.
pub fn gen_trace(config: &ExperimentConfig, out_path: &Path) -> Result<()> {
    config.validate()?;
    let topology = config.topology.build()?;
    let trace = config.build_trace(&topology)?;
    if let Some(parent) = out_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_trace_csv(out_path, &trace)
}

/// Deterministic rollout of a random day-sampling policy; used to sanity
/// check reward bookkeeping end to end. Returns per-episode stats.
pub fn quick_random_rollout(config: &ExperimentConfig, episodes: usize) -> Result<Vec<EpisodeStats>> {
    let mut cfg = config.learner.clone();
    cfg.episodes = episodes;
    let (mut env, _) = build_env(config, SplitPolicy::EqualSplit)?;
    let (train_pool, _) = config.day_split(env.trace_len());
    let result = train(&mut env, &cfg, Algorithm::Random, config.seed, &train_pool)?;
    Ok(result.episodes)
}
