//! Evaluation records, per-policy aggregates, and plot-ready CSV export.
//!
//! CSV schemas (all UTF-8, LF, header row first):
//! - windows.csv: `policy,day,window_in_day,window_index,reward,delay_s,feasible_u,feasible_e,violated,operation,reconfiguration,violation,revenue,total`
//! - cumulative_cost.csv: `policy,window,cumulative_cost`
//! - delay_cdf.csv: `policy,delay_s,fraction` (finite delays only, sorted)
//! - violation_table.csv: `policy,windows,violations,violation_probability`
//! - learning_curve.csv: `episode,mean_reward,mean_cost,violation_rate`

use crate::error::Result;
use crate::learner::EpisodeStats;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowRecord {
    pub policy: String,
    pub day: usize,
    pub window_in_day: usize,
    pub window_index: usize,
    pub reward: f64,
    /// Infinite when the window was infeasible or a queue unstable.
    pub delay_s: f64,
    pub feasible_u: bool,
    pub feasible_e: bool,
    pub violated: bool,
    pub operation: f64,
    pub reconfiguration: f64,
    pub violation: f64,
    pub revenue: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyAggregate {
    pub policy: String,
    pub windows: usize,
    pub mean_window_cost: f64,
    pub mean_daily_cost: f64,
    pub violation_probability: f64,
    /// Mean over finite delays; NaN when no window produced one.
    pub mean_delay_s: f64,
    pub finite_delay_windows: usize,
    pub mean_operation: f64,
    pub mean_reconfiguration: f64,
    pub mean_violation: f64,
    pub mean_revenue: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub windows_per_day: usize,
    pub records: Vec<WindowRecord>,
    pub aggregates: Vec<PolicyAggregate>,
}

impl EvaluationReport {
    pub fn from_records(records: Vec<WindowRecord>, windows_per_day: usize) -> Self {
        let mut order: Vec<String> = Vec::new();
        for r in &records {
            if !order.contains(&r.policy) {
                order.push(r.policy.clone());
            }
        }
        let aggregates = order
            .iter()
            .map(|policy| {
                let rows: Vec<&WindowRecord> =
                    records.iter().filter(|r| &r.policy == policy).collect();
                let n = rows.len();
                let sum = |f: fn(&WindowRecord) -> f64| -> f64 { rows.iter().map(|r| f(r)).sum() };
                let violations = rows.iter().filter(|r| r.violated).count();
                let finite: Vec<f64> = rows
                    .iter()
                    .map(|r| r.delay_s)
                    .filter(|d| d.is_finite())
                    .collect();
                PolicyAggregate {
                    policy: policy.clone(),
                    windows: n,
                    mean_window_cost: sum(|r| r.total) / n as f64,
                    mean_daily_cost: sum(|r| r.total) / n as f64 * windows_per_day as f64,
                    violation_probability: violations as f64 / n as f64,
                    mean_delay_s: finite.iter().sum::<f64>() / finite.len().max(1) as f64,
                    finite_delay_windows: finite.len(),
                    mean_operation: sum(|r| r.operation) / n as f64,
                    mean_reconfiguration: sum(|r| r.reconfiguration) / n as f64,
                    mean_violation: sum(|r| r.violation) / n as f64,
                    mean_revenue: sum(|r| r.revenue) / n as f64,
                }
            })
            .collect();
        EvaluationReport {
            windows_per_day,
            records,
            aggregates,
        }
    }

    pub fn aggregate_for(&self, policy: &str) -> Option<&PolicyAggregate> {
        self.aggregates.iter().find(|a| a.policy == policy)
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn fmt_delay(d: f64) -> String {
    if d.is_finite() {
        format!("{d}")
    } else {
        "inf".into()
    }
}

pub fn write_window_records(path: &Path, records: &[WindowRecord]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(
        out,
        "policy,day,window_in_day,window_index,reward,delay_s,feasible_u,feasible_e,violated,operation,reconfiguration,violation,revenue,total"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.day,
            r.window_in_day,
            r.window_index,
            r.reward,
            fmt_delay(r.delay_s),
            r.feasible_u,
            r.feasible_e,
            r.violated,
            r.operation,
            r.reconfiguration,
            r.violation,
            r.revenue,
            r.total
        )?;
    }
    Ok(())
}

pub fn write_learning_curve(path: &Path, episodes: &[EpisodeStats]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "episode,mean_reward,mean_cost,violation_rate")?;
    for e in episodes {
        writeln!(
            out,
            "{},{},{},{}",
            e.episode, e.mean_reward, e.mean_cost, e.violation_rate
        )?;
    }
    Ok(())
}

/// Write the plot-ready CSV files for a report into `out_dir`.
pub fn emit_plot_data(report: &EvaluationReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;

    // Cumulative cost per policy, in record order.
    let mut out = create(&out_dir.join("cumulative_cost.csv"))?;
    writeln!(out, "policy,window,cumulative_cost")?;
    for agg in &report.aggregates {
        let mut cum = 0.0;
        let mut w = 0usize;
        for r in report.records.iter().filter(|r| r.policy == agg.policy) {
            cum += r.total;
            writeln!(out, "{},{},{}", agg.policy, w, cum)?;
            w += 1;
        }
    }
    drop(out);

    // Delay CDF over finite delays.
    let mut out = create(&out_dir.join("delay_cdf.csv"))?;
    writeln!(out, "policy,delay_s,fraction")?;
    for agg in &report.aggregates {
        let mut delays: Vec<f64> = report
            .records
            .iter()
            .filter(|r| r.policy == agg.policy && r.delay_s.is_finite())
            .map(|r| r.delay_s)
            .collect();
        delays.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = delays.len();
        for (i, d) in delays.iter().enumerate() {
            writeln!(out, "{},{},{}", agg.policy, d, (i + 1) as f64 / n as f64)?;
        }
    }
    drop(out);

    // Violation table.
    let mut out = create(&out_dir.join("violation_table.csv"))?;
    writeln!(out, "policy,windows,violations,violation_probability")?;
    for agg in &report.aggregates {
        let violations = report
            .records
            .iter()
            .filter(|r| r.policy == agg.policy && r.violated)
            .count();
        writeln!(
            out,
            "{},{},{},{}",
            agg.policy, agg.windows, violations, agg.violation_probability
        )?;
    }
    Ok(())
}
