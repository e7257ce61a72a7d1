//! Inner-layer workload distribution: given a resource allocation, choose
//! the per-overlapped-zone split fractions.
//!
//! For the delay-sensitive service the split minimizes the average service
//! delay subject to queue stability and the unit box; the objective is
//! smooth and convex on the stable region (its denominators are exactly the
//! stability margins, so it blows up at the boundary). For the delay-tolerant
//! service any stability-feasible split is acceptable.
//!
//! The solver is self-contained and deterministic: a squared-hinge phase-1
//! finds a strictly interior point (or certifies infeasibility), then a
//! log-barrier with projected-gradient descent and Armijo backtracking
//! minimizes the delay objective inside the box.

use crate::cost::SlicingDecision;
use crate::error::{Error, Result};
use crate::service::{LoadProfile, STABILITY_EPS};
use serde::{Deserialize, Serialize};

/// Strict-interior margin (tasks/s) the optimizer keeps between arrivals and
/// service rates, bounding the delay denominators away from zero.
pub const INTERIOR_MARGIN: f64 = 1e-6;

/// Residual threshold (tasks/s of total constraint violation) under which an
/// instance counts as feasible.
pub const FEASIBILITY_RESIDUAL: f64 = 1e-9;

/// Iteration budget across phase-1 and all barrier stages.
pub const MAX_ITERATIONS: usize = 10_000;

/// KKT residual the solver must reach when it exhausts the iteration budget.
pub const KKT_TOLERANCE: f64 = 1e-4;

/// Transferable workload of one overlapped zone for a single service.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TransferPair {
    pub near_bs: usize,
    pub far_bs: usize,
    /// Zone workload in tasks/s; a split `beta` sends `beta*rate` to the
    /// near BS and the remainder to the far BS.
    pub rate: f64,
}

/// One-service workload-distribution problem for a fixed allocation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InnerInstance {
    /// Offloading-queue service rates per BS, tasks/s.
    pub spectrum_rate: Vec<f64>,
    /// Processing-queue service rates per BS, tasks/s.
    pub compute_rate: Vec<f64>,
    /// Split-independent arrivals per BS, tasks/s.
    pub base_arrivals: Vec<f64>,
    /// One entry per overlapped zone.
    pub transfers: Vec<TransferPair>,
    /// Total workload on the road, tasks/s (objective normalizer).
    pub total_workload: f64,
    /// Additive handover term of the delay objective, seconds.
    pub handover_delay_s: f64,
    /// Whether the delay objective applies (delay-sensitive service).
    pub delay_sensitive: bool,
}

impl InnerInstance {
    /// Assemble the instance for `service` from a load profile and the
    /// allocation columns of a decision.
    pub fn from_profile(
        profile: &LoadProfile,
        service: usize,
        decision: &SlicingDecision,
        handover_delay_s: f64,
    ) -> Self {
        let n_bs = profile.num_bs();
        let spectrum_rate = (0..n_bs)
            .map(|n| profile.spectrum_service_rate(n, service, decision.spectrum[n][service]))
            .collect();
        let compute_rate = (0..n_bs)
            .map(|n| profile.compute_service_rate(service, decision.compute[n][service]))
            .collect();
        let transfers = profile
            .overlap_loads
            .iter()
            .map(|l| TransferPair {
                near_bs: l.near_bs,
                far_bs: l.far_bs,
                rate: l.rate[service],
            })
            .collect();
        InnerInstance {
            spectrum_rate,
            compute_rate,
            base_arrivals: profile.base_arrivals.iter().map(|r| r[service]).collect(),
            transfers,
            total_workload: profile.total_workload[service],
            handover_delay_s,
            delay_sensitive: service == crate::SENSITIVE,
        }
    }

    pub fn num_bs(&self) -> usize {
        self.base_arrivals.len()
    }

    pub fn dim(&self) -> usize {
        self.transfers.len()
    }

    /// Arrival rate at every BS under `split`.
    pub fn arrivals(&self, split: &[f64]) -> Vec<f64> {
        let mut a = self.base_arrivals.clone();
        for (p, &b) in self.transfers.iter().zip(split) {
            a[p.near_bs] += p.rate * b;
            a[p.far_bs] -= p.rate * b;
        }
        a
    }

    /// Rate margins (tasks/s) of all 2N stability constraints: first the
    /// offloading queues, then the processing queues.
    pub fn rate_margins(&self, split: &[f64]) -> Vec<f64> {
        let a = self.arrivals(split);
        let mut m = Vec::with_capacity(2 * self.num_bs());
        for n in 0..self.num_bs() {
            m.push(self.spectrum_rate[n] - a[n]);
        }
        for n in 0..self.num_bs() {
            m.push(self.compute_rate[n] - a[n]);
        }
        m
    }

    /// Total constraint violation at `split`, tasks/s.
    pub fn violation(&self, split: &[f64]) -> f64 {
        self.rate_margins(split).iter().map(|&g| (-g).max(0.0)).sum()
    }
}

/// Result of one inner solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InnerSolution {
    /// Split fractions, one per overlapped zone, inside the unit box.
    pub beta: Vec<f64>,
    /// Average service delay at `beta` (delay-sensitive problems only).
    pub objective_delay_s: Option<f64>,
    pub feasible: bool,
    pub iterations: usize,
    /// Projected-gradient residual of the delay objective at `beta`.
    pub kkt_residual: f64,
}

/// Delay objective and its analytic gradient at a strictly stable point.
///
/// The objective is the handover term plus the normalized sum over BSs of
/// `mu/(mu - a)` for both queues (minus the constant 2), which equals the
/// arrival-weighted mean sojourn form used by the cost pipeline.
pub fn objective_and_gradient(instance: &InnerInstance, split: &[f64]) -> Result<(f64, Vec<f64>)> {
    debug_assert_eq!(split.len(), instance.dim());
    if instance.total_workload <= 0.0 {
        return Ok((instance.handover_delay_s, vec![0.0; instance.dim()]));
    }
    let arrivals = instance.arrivals(split);
    let n_bs = instance.num_bs();
    let mut value = 0.0;
    // Per-BS derivative of the summand with respect to that BS's arrivals.
    let mut coef = vec![0.0; n_bs];
    for n in 0..n_bs {
        for rate in [instance.spectrum_rate[n], instance.compute_rate[n]] {
            let margin = rate - arrivals[n];
            if margin <= STABILITY_EPS {
                return Err(Error::UnstableQueue {
                    bs: n,
                    service_rate: rate,
                    arrival_rate: arrivals[n],
                });
            }
            value += rate / margin - 1.0;
            coef[n] += rate / (margin * margin);
        }
    }
    let scale = 1.0 / instance.total_workload;
    let mut grad = vec![0.0; instance.dim()];
    for (o, p) in instance.transfers.iter().enumerate() {
        grad[o] = scale * p.rate * (coef[p.near_bs] - coef[p.far_bs]);
    }
    Ok((instance.handover_delay_s + scale * value, grad))
}

fn clamp_box(split: &mut [f64]) {
    for b in split.iter_mut() {
        *b = b.clamp(0.0, 1.0);
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Squared-hinge pursuit of margins >= `target`; returns remaining hinge
/// value and the iteration count used.
fn phase1_stage(
    instance: &InnerInstance,
    split: &mut Vec<f64>,
    target: f64,
    max_iters: usize,
) -> (f64, usize) {
    let dim = instance.dim();
    let n_bs = instance.num_bs();
    let hinge = |s: &[f64]| -> f64 {
        instance
            .rate_margins(s)
            .iter()
            .map(|&g| {
                let d = (target - g).max(0.0);
                0.5 * d * d
            })
            .sum()
    };
    let mut value = hinge(split);
    let mut iters = 0;
    // Conservative Lipschitz estimate for the initial step.
    let l: f64 = instance
        .transfers
        .iter()
        .map(|p| 4.0 * p.rate * p.rate)
        .sum::<f64>()
        .max(1e-12);
    let mut step = 1.0 / l;
    while value > 0.0 && iters < max_iters {
        iters += 1;
        let margins = instance.rate_margins(split);
        // Shortfall per BS combines both queues (same arrival derivative).
        let mut shortfall = vec![0.0; n_bs];
        for n in 0..n_bs {
            shortfall[n] = (target - margins[n]).max(0.0) + (target - margins[n_bs + n]).max(0.0);
        }
        let mut grad = vec![0.0; dim];
        for (o, p) in instance.transfers.iter().enumerate() {
            grad[o] = p.rate * (shortfall[p.near_bs] - shortfall[p.far_bs]);
        }
        let gnorm = norm2(&grad);
        if gnorm < 1e-16 {
            break;
        }
        // Backtracking on the projected step.
        let mut t = step;
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand: Vec<f64> = split.iter().zip(&grad).map(|(b, g)| b - t * g).collect();
            clamp_box(&mut cand);
            let cand_value = hinge(&cand);
            if cand_value < value - 1e-18 {
                let moved = cand
                    .iter()
                    .zip(split.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0_f64, f64::max);
                *split = cand;
                value = cand_value;
                step = t * 1.5;
                accepted = true;
                if moved < 1e-14 {
                    iters = max_iters.min(iters); // effectively converged
                    return (value, iters);
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (value, iters)
}

/// Decide whether the stability region intersects the unit box, returning a
/// witness split. The witness is the best point the hinge pursuit reached;
/// when the instance is feasible with interior the witness carries margins
/// of at least a few [`INTERIOR_MARGIN`]s.
pub fn check_feasibility(instance: &InnerInstance) -> (bool, Vec<f64>, usize) {
    let dim = instance.dim();
    let mut split = vec![0.5; dim];
    let mut total_iters = 0;
    if dim == 0 {
        let feasible = instance.violation(&split) <= FEASIBILITY_RESIDUAL;
        return (feasible, split, 0);
    }
    // Aim for a comfortable interior first, then relax toward the true
    // feasibility question.
    for target in [1.0, 1e-3, 2.0 * INTERIOR_MARGIN] {
        let (value, iters) = phase1_stage(instance, &mut split, target, 2_500);
        total_iters += iters;
        if value == 0.0 {
            break;
        }
    }
    let feasible = instance.violation(&split) <= FEASIBILITY_RESIDUAL;
    (feasible, split, total_iters)
}

/// Barrier function value, gradient, and Hessian at a strictly interior
/// point; `None` outside the interior. The objective and the log terms share
/// the arrival structure, so both reduce to per-BS coefficients contracted
/// against the transfer pattern.
fn barrier_eval(
    instance: &InnerInstance,
    split: &[f64],
    mu: f64,
) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let dim = instance.dim();
    let n_bs = instance.num_bs();
    let arrivals = instance.arrivals(split);
    let scale = if instance.total_workload > 0.0 {
        1.0 / instance.total_workload
    } else {
        0.0
    };
    let mut value = instance.handover_delay_s;
    let mut c1 = vec![0.0; n_bs];
    let mut c2 = vec![0.0; n_bs];
    for n in 0..n_bs {
        for rate in [instance.spectrum_rate[n], instance.compute_rate[n]] {
            let margin = rate - arrivals[n];
            let slack = margin - INTERIOR_MARGIN;
            if slack <= 0.0 || margin <= STABILITY_EPS {
                return None;
            }
            value += scale * (rate / margin - 1.0) - mu * slack.ln();
            c1[n] += scale * rate / (margin * margin) + mu / slack;
            c2[n] += 2.0 * scale * rate / (margin * margin * margin) + mu / (slack * slack);
        }
    }
    let mut grad = vec![0.0; dim];
    let mut hess = vec![0.0; dim * dim];
    for (o, p) in instance.transfers.iter().enumerate() {
        grad[o] = p.rate * (c1[p.near_bs] - c1[p.far_bs]);
    }
    for (i, pi) in instance.transfers.iter().enumerate() {
        for (j, pj) in instance.transfers.iter().enumerate().skip(i) {
            let mut h = 0.0;
            for n in 0..n_bs {
                let psi_i = if n == pi.near_bs {
                    pi.rate
                } else if n == pi.far_bs {
                    -pi.rate
                } else {
                    continue;
                };
                let psi_j = if n == pj.near_bs {
                    pj.rate
                } else if n == pj.far_bs {
                    -pj.rate
                } else {
                    continue;
                };
                h += psi_i * psi_j * c2[n];
            }
            hess[i * dim + j] = h;
            hess[j * dim + i] = h;
        }
    }
    Some((value, grad, hess))
}

/// In-place Cholesky solve of `a x = b` for a symmetric matrix; returns
/// false when a pivot is not positive.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for k in 0..n {
        let mut pivot = a[k * n + k];
        for j in 0..k {
            pivot -= a[k * n + j] * a[k * n + j];
        }
        if pivot <= 0.0 {
            return false;
        }
        let l_kk = pivot.sqrt();
        a[k * n + k] = l_kk;
        for i in k + 1..n {
            let mut v = a[i * n + k];
            for j in 0..k {
                v -= a[i * n + j] * a[k * n + j];
            }
            a[i * n + k] = v / l_kk;
        }
    }
    // Forward then backward substitution.
    for i in 0..n {
        let mut v = b[i];
        for j in 0..i {
            v -= a[i * n + j] * b[j];
        }
        b[i] = v / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for j in i + 1..n {
            v -= a[j * n + i] * b[j];
        }
        b[i] = v / a[i * n + i];
    }
    true
}

/// Minimize the barrier function for a fixed `mu` by damped projected
/// Newton: free coordinates take a Newton direction, coordinates pinned at
/// a bound with an outward gradient are frozen, and a backtracking line
/// search guards the strict interior. Returns iterations used.
fn newton_stage(instance: &InnerInstance, split: &mut Vec<f64>, mu: f64, max_iters: usize) -> usize {
    let dim = instance.dim();
    let stage_tol = (mu * 1e-2).max(1e-8);
    let mut iters = 0;
    while iters < max_iters {
        iters += 1;
        let Some((value, grad, hess)) = barrier_eval(instance, split, mu) else {
            return iters;
        };
        // Projected-gradient residual as the stage stopping rule.
        let mut projected: Vec<f64> = split.iter().zip(&grad).map(|(b, g)| b - g).collect();
        clamp_box(&mut projected);
        let residual = projected
            .iter()
            .zip(split.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if residual <= stage_tol {
            break;
        }
        // Active coordinates sit on a bound with the gradient pushing out.
        let free: Vec<usize> = (0..dim)
            .filter(|&i| {
                !((split[i] <= 1e-12 && grad[i] > 0.0) || (split[i] >= 1.0 - 1e-12 && grad[i] < 0.0))
            })
            .collect();
        if free.is_empty() {
            break;
        }
        let nf = free.len();
        let diag_scale = free
            .iter()
            .map(|&i| hess[i * dim + i])
            .fold(0.0_f64, f64::max)
            .max(1e-12);
        let mut direction = vec![0.0; dim];
        let mut solved = false;
        let mut damping = 1e-9 * diag_scale;
        for _ in 0..4 {
            let mut a = vec![0.0; nf * nf];
            let mut rhs = vec![0.0; nf];
            for (r, &i) in free.iter().enumerate() {
                rhs[r] = -grad[i];
                for (c, &j) in free.iter().enumerate() {
                    a[r * nf + c] = hess[i * dim + j];
                }
                a[r * nf + r] += damping;
            }
            if cholesky_solve(&mut a, &mut rhs, nf) {
                for (r, &i) in free.iter().enumerate() {
                    direction[i] = rhs[r];
                }
                solved = true;
                break;
            }
            damping = (damping * 100.0).max(1e-6 * diag_scale);
        }
        if !solved {
            for &i in &free {
                direction[i] = -grad[i];
            }
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand: Vec<f64> = split
                .iter()
                .zip(&direction)
                .map(|(b, d)| b + t * d)
                .collect();
            clamp_box(&mut cand);
            if let Some((cand_value, _, _)) = barrier_eval(instance, &cand, mu) {
                if cand_value < value {
                    let moved = cand
                        .iter()
                        .zip(split.iter())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0_f64, f64::max);
                    *split = cand;
                    accepted = moved > 1e-15;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // Fall back to a plain projected-gradient step before giving up.
            let mut t = 1.0 / diag_scale.max(1.0);
            let mut improved = false;
            for _ in 0..60 {
                let mut cand: Vec<f64> =
                    split.iter().zip(&grad).map(|(b, g)| b - t * g).collect();
                clamp_box(&mut cand);
                if let Some((cand_value, _, _)) = barrier_eval(instance, &cand, mu) {
                    if cand_value < value {
                        *split = cand;
                        improved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
    }
    iters
}

/// Projected-gradient residual of the delay objective at `split`.
fn kkt_residual(instance: &InnerInstance, split: &[f64]) -> f64 {
    match objective_and_gradient(instance, split) {
        Ok((_, grad)) => {
            let mut moved: Vec<f64> = split.iter().zip(&grad).map(|(b, g)| b - g).collect();
            clamp_box(&mut moved);
            moved
                .iter()
                .zip(split)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        }
        Err(_) => f64::INFINITY,
    }
}

/// Solve the delay-sensitive problem: minimize the average service delay
/// over splits that keep every queue stable with a strict interior margin.
pub fn solve_delay_sensitive(instance: &InnerInstance) -> Result<InnerSolution> {
    let dim = instance.dim();
    let (feasible, witness, phase1_iters) = check_feasibility(instance);
    if !feasible {
        return Ok(InnerSolution {
            beta: witness,
            objective_delay_s: None,
            feasible: false,
            iterations: phase1_iters,
            kkt_residual: f64::NAN,
        });
    }
    if dim == 0 || instance.total_workload <= 0.0 {
        let objective = objective_and_gradient(instance, &witness)
            .map(|(f, _)| f)
            .unwrap_or(f64::INFINITY);
        return Ok(InnerSolution {
            beta: witness,
            objective_delay_s: Some(objective),
            feasible: true,
            iterations: phase1_iters,
            kkt_residual: 0.0,
        });
    }

    let mut split = witness.clone();
    // Degenerate feasibility without interior: stay at the witness, report
    // the (possibly enormous) delay there.
    if instance
        .rate_margins(&split)
        .iter()
        .any(|&g| g <= INTERIOR_MARGIN)
    {
        let objective = objective_and_gradient(instance, &split).map(|(f, _)| f).ok();
        return Ok(InnerSolution {
            beta: split,
            objective_delay_s: Some(objective.unwrap_or(f64::INFINITY)),
            feasible: true,
            iterations: phase1_iters,
            kkt_residual: f64::NAN,
        });
    }

    let mut total_iters = phase1_iters;
    let mut last_objective = objective_and_gradient(instance, &split)?.0;
    let mut mu = 1e-2;
    let mut converged = false;
    while mu > 1e-11 && total_iters < MAX_ITERATIONS {
        let budget = (MAX_ITERATIONS - total_iters).min(400);
        total_iters += newton_stage(instance, &mut split, mu, budget);
        let objective = objective_and_gradient(instance, &split)?.0;
        // The barrier biases the iterate by roughly mu per constraint; only
        // stop once that bias is far below the objective tolerance.
        if (last_objective - objective).abs() < 1e-8 && mu < 1e-8 {
            converged = true;
            last_objective = objective;
            break;
        }
        last_objective = objective;
        mu *= 0.1;
    }

    let residual = kkt_residual(instance, &split);
    if !converged && total_iters >= MAX_ITERATIONS && residual > KKT_TOLERANCE {
        return Err(Error::ConvergenceFailure {
            kkt_residual: residual,
            iterations: total_iters,
            instance_json: serde_json::to_string(instance).unwrap_or_default(),
        });
    }

    Ok(InnerSolution {
        beta: split.clone(),
        objective_delay_s: Some(last_objective),
        feasible: true,
        iterations: total_iters,
        kkt_residual: residual,
    })
}

/// Solve the delay-tolerant problem: any split satisfying the stability
/// constraints (the phase-1 witness), or an infeasibility verdict.
pub fn solve_delay_tolerant(instance: &InnerInstance) -> InnerSolution {
    let (feasible, witness, iters) = check_feasibility(instance);
    InnerSolution {
        beta: witness,
        objective_delay_s: None,
        feasible,
        iterations: iters,
        kkt_residual: f64::NAN,
    }
}
