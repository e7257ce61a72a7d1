//! Independent validation oracles used by tests and the acceptance suite.
//!
//! These deliberately avoid the implementation paths they check: the queue
//! simulator replays arrivals event by event instead of using the analytic
//! sojourn formula, and the grid oracle evaluates the delay objective in its
//! arrival-weighted form rather than the rewritten form the solver uses.

use crate::error::{Error, Result};
use crate::inner::InnerInstance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest split dimension the grid oracles accept.
pub const GRID_DIM_LIMIT: usize = 3;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Mm1SimResult {
    pub mean_sojourn_s: f64,
    /// 95% confidence halfwidth from 20 batch means.
    pub confidence_halfwidth_s: f64,
    pub samples: usize,
}

/// Event-driven single-server FIFO queue with exponential interarrival and
/// service times. Returns the sample mean sojourn and a batch-means CI.
pub fn simulate_mm1(
    arrival_rate: f64,
    service_rate: f64,
    num_arrivals: usize,
    seed: u64,
) -> Result<Mm1SimResult> {
    if service_rate <= arrival_rate {
        return Err(Error::UnstableParameters {
            service_rate,
            arrival_rate,
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let interarrival = Exp::new(arrival_rate).expect("positive rate");
    let service = Exp::new(service_rate).expect("positive rate");

    const BATCHES: usize = 20;
    let batch_size = (num_arrivals / BATCHES).max(1);
    let mut batch_means = Vec::with_capacity(BATCHES);

    let mut clock = 0.0_f64;
    let mut server_free_at = 0.0_f64;
    let mut batch_sum = 0.0_f64;
    let mut in_batch = 0usize;
    let mut total_sum = 0.0_f64;
    let mut total = 0usize;

    for _ in 0..num_arrivals {
        clock += interarrival.sample(&mut rng);
        let start = clock.max(server_free_at);
        let departure = start + service.sample(&mut rng);
        server_free_at = departure;
        let sojourn = departure - clock;
        batch_sum += sojourn;
        total_sum += sojourn;
        in_batch += 1;
        total += 1;
        if in_batch == batch_size && batch_means.len() < BATCHES {
            batch_means.push(batch_sum / in_batch as f64);
            batch_sum = 0.0;
            in_batch = 0;
        }
    }
    let mean = total_sum / total as f64;
    let halfwidth = if batch_means.len() >= 2 {
        let m = batch_means.iter().sum::<f64>() / batch_means.len() as f64;
        let var = batch_means.iter().map(|b| (b - m) * (b - m)).sum::<f64>()
            / (batch_means.len() - 1) as f64;
        // t quantile for 19 dof at 97.5%.
        2.093 * (var / batch_means.len() as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(Mm1SimResult {
        mean_sojourn_s: mean,
        confidence_halfwidth_s: halfwidth,
        samples: total,
    })
}

/// Delay objective in its arrival-weighted form: handover term plus
/// `sum_n (a_n / total) * (sojourn_offload + sojourn_process)`. Returns
/// `None` when any queue is at or past its stability boundary.
pub fn weighted_delay_objective(instance: &InnerInstance, split: &[f64]) -> Option<f64> {
    if instance.total_workload <= 0.0 {
        return Some(instance.handover_delay_s);
    }
    let arrivals = instance.arrivals(split);
    let mut value = instance.handover_delay_s;
    for n in 0..instance.num_bs() {
        let a = arrivals[n];
        let ms = instance.spectrum_rate[n] - a;
        let mc = instance.compute_rate[n] - a;
        if ms <= 0.0 || mc <= 0.0 {
            return None;
        }
        if a > 0.0 {
            value += a / instance.total_workload * (1.0 / ms + 1.0 / mc);
        }
    }
    Some(value)
}

fn margins_nonnegative(instance: &InnerInstance, split: &[f64]) -> bool {
    instance.rate_margins(split).iter().all(|&g| g >= 0.0)
}

/// Outcome of an exhaustive grid scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridResult {
    /// Best feasible grid point and its objective, or `None` when no grid
    /// point satisfies the stability constraints.
    pub best: Option<(Vec<f64>, f64)>,
}

fn grid_points(step: f64) -> (usize, Vec<f64>) {
    let n = (1.0 / step).round().max(1.0) as usize;
    let axis: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    (n, axis)
}

/// Exhaustive scan of the split grid at `step` over the feasible region,
/// keeping the best objective value. Guarded to three dimensions.
pub fn grid_search_inner(instance: &InnerInstance, step: f64) -> Result<GridResult> {
    let dim = instance.dim();
    if dim > GRID_DIM_LIMIT {
        return Err(Error::ScaleGuard(dim));
    }
    let (_, axis) = grid_points(step);

    let best = match dim {
        0 => margins_nonnegative(instance, &[]).then(|| {
            let f = weighted_delay_objective(instance, &[]).unwrap_or(f64::INFINITY);
            (Vec::new(), f)
        }),
        1 => {
            let mut best: Option<(Vec<f64>, f64)> = None;
            for &b in &axis {
                consider(instance, &[b], &mut best);
            }
            best
        }
        2 => {
            let partials: Vec<Option<(Vec<f64>, f64)>> = axis
                .par_iter()
                .map(|&b0| {
                    let mut best = None;
                    for &b1 in &axis {
                        consider(instance, &[b0, b1], &mut best);
                    }
                    best
                })
                .collect();
            merge(partials)
        }
        3 => {
            let partials: Vec<Option<(Vec<f64>, f64)>> = axis
                .par_iter()
                .map(|&b0| {
                    let mut best = None;
                    for &b1 in &axis {
                        for &b2 in &axis {
                            consider(instance, &[b0, b1, b2], &mut best);
                        }
                    }
                    best
                })
                .collect();
            merge(partials)
        }
        _ => unreachable!(),
    };
    Ok(GridResult { best })
}

fn consider(instance: &InnerInstance, point: &[f64], best: &mut Option<(Vec<f64>, f64)>) {
    if !margins_nonnegative(instance, point) {
        return;
    }
    let f = weighted_delay_objective(instance, point).unwrap_or(f64::INFINITY);
    match best {
        Some((_, cur)) if *cur <= f => {}
        _ => *best = Some((point.to_vec(), f)),
    }
}

fn merge(partials: Vec<Option<(Vec<f64>, f64)>>) -> Option<(Vec<f64>, f64)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for p in partials.into_iter().flatten() {
        match &best {
            Some((_, cur)) if *cur <= p.1 => {}
            _ => best = Some(p),
        }
    }
    best
}

/// Grid feasibility verdict equivalent to scanning every grid point, but with
/// the innermost axis resolved in closed form (the margins are linear in each
/// coordinate, so the feasible stretch of a grid line is an interval).
pub fn grid_feasible(instance: &InnerInstance, step: f64) -> Result<Option<Vec<f64>>> {
    let dim = instance.dim();
    if dim > GRID_DIM_LIMIT {
        return Err(Error::ScaleGuard(dim));
    }
    if dim == 0 {
        return Ok(margins_nonnegative(instance, &[]).then(Vec::new));
    }
    let (n, axis) = grid_points(step);
    let inner_axis = dim - 1;

    // Closed-form scan of one grid line along the innermost axis.
    let line = |outer: &[f64]| -> Option<f64> {
        // Margin_j(b) = base_j - coeff_j * b along the inner axis.
        let mut point = outer.to_vec();
        point.push(0.0);
        let base = instance.rate_margins(&point);
        let inner = &instance.transfers[inner_axis];
        let n_bs = instance.num_bs();
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        for (j, &b) in base.iter().enumerate() {
            let bs = j % n_bs;
            let coeff = if bs == inner.near_bs {
                inner.rate
            } else if bs == inner.far_bs {
                -inner.rate
            } else {
                0.0
            };
            if coeff > 0.0 {
                hi = hi.min(b / coeff);
            } else if coeff < 0.0 {
                lo = lo.max(b / coeff);
            } else if b < 0.0 {
                return None;
            }
        }
        if lo > hi {
            return None;
        }
        // First grid index i/n inside [lo, hi].
        let i_lo = (lo * n as f64 - 1e-9).ceil().max(0.0) as usize;
        let i_hi = (hi * n as f64 + 1e-9).floor().min(n as f64) as usize;
        (i_lo <= i_hi).then(|| i_lo as f64 / n as f64)
    };

    let witness = match dim {
        1 => line(&[]).map(|b| vec![b]),
        2 => axis.iter().find_map(|&b0| line(&[b0]).map(|b| vec![b0, b])),
        3 => {
            let hits: Vec<Option<Vec<f64>>> = axis
                .par_iter()
                .map(|&b0| {
                    axis.iter()
                        .find_map(|&b1| line(&[b0, b1]).map(|b| vec![b0, b1, b]))
                })
                .collect();
            hits.into_iter().flatten().next()
        }
        _ => unreachable!(),
    };
    Ok(witness)
}

/// Sample interior point pairs and report the largest Jensen violation
/// `f(t b1 + (1-t) b2) - t f(b1) - (1-t) f(b2)` observed. Nonpositive values
/// are clamped to zero.
pub fn convexity_probe(instance: &InnerInstance, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dim = instance.dim();
    let mut worst = 0.0_f64;
    let sample_interior = |rng: &mut ChaCha20Rng| -> Option<Vec<f64>> {
        for _ in 0..200 {
            let b: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            if instance.rate_margins(&b).iter().all(|&g| g > 1e-6) {
                return Some(b);
            }
        }
        None
    };
    for _ in 0..trials {
        let (Some(b1), Some(b2)) = (sample_interior(&mut rng), sample_interior(&mut rng)) else {
            continue;
        };
        let t: f64 = rng.random::<f64>();
        let mid: Vec<f64> = b1
            .iter()
            .zip(&b2)
            .map(|(x, y)| t * x + (1.0 - t) * y)
            .collect();
        let (Some(f1), Some(f2), Some(fm)) = (
            weighted_delay_objective(instance, &b1),
            weighted_delay_objective(instance, &b2),
            weighted_delay_objective(instance, &mid),
        ) else {
            continue;
        };
        // Equal endpoints make the chord constant; skip the rounding of the
        // affine combination in that case.
        let chord = if f1 == f2 { f1 } else { t * f1 + (1.0 - t) * f2 };
        worst = worst.max(fm - chord);
    }
    worst
}

/// Draw a random inner instance with known feasibility.
///
/// Feasible instances are built around a reference split with slack on every
/// queue; infeasible ones additionally push one queue's service rate below
/// the smallest arrival rate any split can produce, so the verdict is robust
/// to grid resolution.
pub fn sample_instance(rng: &mut ChaCha20Rng, dim: usize, feasible: bool) -> InnerInstance {
    let n_bs = (dim + 1).max(2);
    // Chain of transfers: zone o sits between BSs o and o+1.
    let mut transfers = Vec::with_capacity(dim);
    let mut far_load = vec![0.0; n_bs];
    for o in 0..dim {
        let rate = rng.random_range(4.0..20.0);
        let (near_bs, far_bs) = if rng.random::<bool>() {
            (o, o + 1)
        } else {
            (o + 1, o)
        };
        transfers.push(crate::inner::TransferPair { near_bs, far_bs, rate });
        far_load[far_bs] += rate;
    }
    // The far BS of each zone carries the zone's whole load in the base term.
    let base_arrivals: Vec<f64> = (0..n_bs)
        .map(|n| far_load[n] + rng.random_range(1.0..25.0))
        .collect();
    let reference: Vec<f64> = (0..dim).map(|_| rng.random_range(0.15..0.85)).collect();

    let mut instance = InnerInstance {
        spectrum_rate: vec![0.0; n_bs],
        compute_rate: vec![0.0; n_bs],
        base_arrivals,
        transfers,
        total_workload: 0.0,
        handover_delay_s: rng.random_range(0.001..0.01),
        delay_sensitive: true,
    };
    let at_reference = instance.arrivals(&reference);
    for n in 0..n_bs {
        instance.spectrum_rate[n] = at_reference[n] + rng.random_range(1.0..6.0);
        instance.compute_rate[n] = at_reference[n] + rng.random_range(1.0..6.0);
    }
    // Splits only move workload between BSs, so the road total is the sum of
    // the split-independent arrivals.
    instance.total_workload = instance.base_arrivals.iter().sum::<f64>();

    if !feasible {
        // Lowest arrivals BS `b` can ever see: push all near-side transfers
        // away and all far-side transfers toward their near BS.
        let b = rng.random_range(0..n_bs);
        let removable: f64 = instance
            .transfers
            .iter()
            .filter(|p| p.far_bs == b)
            .map(|p| p.rate)
            .sum();
        let floor_arrivals = instance.base_arrivals[b] - removable;
        debug_assert!(floor_arrivals >= 0.0);
        let deficit = rng.random_range(0.5..2.0);
        if rng.random::<bool>() {
            instance.spectrum_rate[b] = (floor_arrivals - deficit).max(0.05);
        } else {
            instance.compute_rate[b] = (floor_arrivals - deficit).max(0.05);
        }
    }
    instance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner::{check_feasibility, objective_and_gradient, TransferPair};
    use approx::assert_relative_eq;

    #[test]
    fn mm1_half_utilization_matches_analytic() {
        let r = simulate_mm1(10.0, 20.0, 1_000_000, 7).unwrap();
        let analytic = 1.0 / (20.0 - 10.0);
        assert!(
            (r.mean_sojourn_s - analytic).abs() / analytic < 0.02,
            "sim {} vs analytic {}",
            r.mean_sojourn_s,
            analytic
        );
        assert!(r.confidence_halfwidth_s > 0.0);
        assert_eq!(r.samples, 1_000_000);
    }

    #[test]
    fn mm1_light_load_approaches_service_time() {
        let r = simulate_mm1(0.01, 10.0, 200_000, 3).unwrap();
        assert_relative_eq!(r.mean_sojourn_s, 0.1, max_relative = 0.03);
    }

    #[test]
    fn mm1_high_utilization_within_three_percent() {
        let r = simulate_mm1(18.0, 20.0, 1_000_000, 13).unwrap();
        let analytic = 0.5;
        assert!(
            (r.mean_sojourn_s - analytic).abs() / analytic < 0.03,
            "sim {} vs analytic {}",
            r.mean_sojourn_s,
            analytic
        );
    }

    #[test]
    fn mm1_rejects_unstable_parameters() {
        assert!(matches!(
            simulate_mm1(20.0, 20.0, 100, 0),
            Err(Error::UnstableParameters { .. })
        ));
    }

    #[test]
    fn grid_finds_symmetric_optimum() {
        let inst = crate::inner::tests::two_bs_instance(
            [40.0, 40.0],
            [30.0, 30.0],
            [5.0, 5.0],
            10.0,
        );
        let res = grid_search_inner(&inst, 1e-3).unwrap();
        let (beta, _) = res.best.unwrap();
        assert_relative_eq!(beta[0], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn grid_rejects_large_dimensions() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let inst = sample_instance(&mut rng, 3, true);
        let mut big = inst;
        big.transfers.push(TransferPair {
            near_bs: 0,
            far_bs: 1,
            rate: 1.0,
        });
        assert!(matches!(
            grid_search_inner(&big, 0.01),
            Err(Error::ScaleGuard(4))
        ));
    }

    #[test]
    fn infeasible_instance_has_no_grid_point() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for dim in 1..=2 {
            let inst = sample_instance(&mut rng, dim, false);
            assert!(grid_search_inner(&inst, 0.01).unwrap().best.is_none());
            assert!(grid_feasible(&inst, 0.01).unwrap().is_none());
        }
    }

    #[test]
    fn interval_feasibility_agrees_with_explicit_scan() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for trial in 0..40 {
            let dim = 1 + trial % 3;
            let inst = sample_instance(&mut rng, dim, trial % 3 != 0);
            let fast = grid_feasible(&inst, 0.02).unwrap().is_some();
            let slow = grid_search_inner(&inst, 0.02).unwrap().best.is_some();
            assert_eq!(fast, slow, "dim {dim} trial {trial}");
        }
    }

    #[test]
    fn objective_routes_agree() {
        // The solver evaluates mu/(mu-a) - 1 sums; the oracle evaluates
        // a/(total) * sojourns. Same function, different algebra.
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        for _ in 0..30 {
            let inst = sample_instance(&mut rng, 2, true);
            let b = vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            if inst.rate_margins(&b).iter().all(|&g| g > 1e-6) {
                let via_solver = objective_and_gradient(&inst, &b).unwrap().0;
                let via_oracle = weighted_delay_objective(&inst, &b).unwrap();
                assert_relative_eq!(via_solver, via_oracle, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn convexity_probe_is_tiny_on_feasible_instances() {
        let mut rng = ChaCha20Rng::seed_from_u64(33);
        for dim in 1..=3 {
            let inst = sample_instance(&mut rng, dim, true);
            assert!(convexity_probe(&inst, 300, 1) <= 1e-12);
        }
    }

    #[test]
    fn degenerate_probe_is_exactly_zero() {
        // No transfers vary: the objective is constant in the split.
        let inst = InnerInstance {
            spectrum_rate: vec![30.0, 30.0],
            compute_rate: vec![30.0, 30.0],
            base_arrivals: vec![10.0, 10.0],
            transfers: vec![TransferPair {
                near_bs: 0,
                far_bs: 1,
                rate: 0.0,
            }],
            total_workload: 20.0,
            handover_delay_s: 0.004,
            delay_sensitive: true,
        };
        assert_eq!(convexity_probe(&inst, 200, 2), 0.0);
    }

    #[test]
    fn one_dimensional_second_differences_are_nonnegative() {
        let mut rng = ChaCha20Rng::seed_from_u64(44);
        let inst = sample_instance(&mut rng, 1, true);
        let h = 1e-3;
        let mut b = 0.05;
        while b < 0.95 {
            let pts = [b - h, b, b + h];
            if pts
                .iter()
                .all(|&x| inst.rate_margins(&[x]).iter().all(|&g| g > 1e-6))
            {
                let f: Vec<f64> = pts
                    .iter()
                    .map(|&x| weighted_delay_objective(&inst, &[x]).unwrap())
                    .collect();
                assert!(f[0] + f[2] - 2.0 * f[1] >= -1e-12);
            }
            b += 0.05;
        }
    }

    #[test]
    fn sampled_feasibility_matches_construction() {
        let mut rng = ChaCha20Rng::seed_from_u64(55);
        for trial in 0..60 {
            let dim = 1 + trial % 3;
            let expect = trial % 2 == 0;
            let inst = sample_instance(&mut rng, dim, expect);
            let (got, witness, _) = check_feasibility(&inst);
            assert_eq!(got, expect, "dim {dim} trial {trial}");
            if got {
                assert!(inst.rate_margins(&witness).iter().all(|&g| g >= 0.0));
            }
        }
    }
}
