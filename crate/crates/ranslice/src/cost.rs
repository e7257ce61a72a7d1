//! Per-window system cost: operation, slice reconfiguration, delay-violation
//! penalty, and revenue.
//!
//! Reconfiguration is charged in the window where a larger allocation takes
//! effect; releasing resources is free. Split changes never cost anything
//! (they move workload, not physical resources). An unstable queue is
//! treated as infinite delay, so the violation penalty fires and revenue is
//! zero.

use crate::error::{Error, Result};
use crate::NUM_SERVICES;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CostWeights {
    /// Per-subcarrier operation cost.
    pub operation_spectrum: f64,
    /// Per-VM operation cost.
    pub operation_compute: f64,
    /// Per added subcarrier reconfiguration cost.
    pub reconfiguration_spectrum: f64,
    /// Per added VM reconfiguration cost.
    pub reconfiguration_compute: f64,
    /// Penalty when the delay-sensitive deadline is exceeded.
    pub violation: f64,
    /// Revenue per second of slack under the deadline.
    pub revenue: f64,
    /// Penalty per infeasible workload-distribution subproblem.
    pub infeasibility: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            operation_spectrum: 1.0,
            operation_compute: 1.0,
            reconfiguration_spectrum: 5.0,
            reconfiguration_compute: 5.0,
            violation: 200.0,
            revenue: 25.0,
            infeasibility: 200.0,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("cost.operation_spectrum", self.operation_spectrum),
            ("cost.operation_compute", self.operation_compute),
            ("cost.reconfiguration_spectrum", self.reconfiguration_spectrum),
            ("cost.reconfiguration_compute", self.reconfiguration_compute),
            ("cost.violation", self.violation),
            ("cost.revenue", self.revenue),
            ("cost.infeasibility", self.infeasibility),
        ];
        for (name, v) in fields {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config {
                    field: name.into(),
                    message: "must be finite and nonnegative".into(),
                });
            }
        }
        Ok(())
    }
}

/// One window's slicing decision: integer spectrum/compute allocations per
/// BS and service, and the workload split per overlapped zone and service.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SlicingDecision {
    /// Subcarriers, indexed `[bs][service]`, every entry >= 1.
    pub spectrum: Vec<[u32; NUM_SERVICES]>,
    /// VM instances, indexed `[bs][service]`, every entry >= 1.
    pub compute: Vec<[u32; NUM_SERVICES]>,
    /// Fractions in [0,1], indexed `[overlapped_zone][service]`.
    pub split: Vec<[f64; NUM_SERVICES]>,
}

impl SlicingDecision {
    /// All-`s`/all-`c` allocation with an equal split everywhere.
    pub fn uniform(n_bs: usize, n_overlapped: usize, s: u32, c: u32) -> Self {
        Self {
            spectrum: vec![[s; NUM_SERVICES]; n_bs],
            compute: vec![[c; NUM_SERVICES]; n_bs],
            split: vec![[0.5; NUM_SERVICES]; n_overlapped],
        }
    }

    /// The minimum legal allocation used as the reset state.
    pub fn all_ones(n_bs: usize, n_overlapped: usize) -> Self {
        Self::uniform(n_bs, n_overlapped, 1, 1)
    }

    pub fn num_bs(&self) -> usize {
        self.spectrum.len()
    }

    /// Split fractions of one service across all overlapped zones.
    pub fn split_column(&self, service: usize) -> Vec<f64> {
        self.split.iter().map(|row| row[service]).collect()
    }

    pub fn set_split_column(&mut self, service: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.split.len());
        for (row, &v) in self.split.iter_mut().zip(values) {
            row[service] = v;
        }
    }
}

/// Cost of running the allocated subcarriers and VM instances for one window.
pub fn operation_cost(decision: &SlicingDecision, weights: &CostWeights) -> f64 {
    let mut cost = 0.0;
    for n in 0..decision.num_bs() {
        for k in 0..NUM_SERVICES {
            cost += weights.operation_spectrum * decision.spectrum[n][k] as f64
                + weights.operation_compute * decision.compute[n][k] as f64;
        }
    }
    cost
}

/// Cost of scaling allocations up between consecutive windows; decreases are
/// free.
pub fn reconfiguration_cost(
    prev: &SlicingDecision,
    next: &SlicingDecision,
    weights: &CostWeights,
) -> Result<f64> {
    if prev.num_bs() != next.num_bs() {
        return Err(Error::DimensionMismatch {
            expected: prev.num_bs(),
            actual: next.num_bs(),
            context: "reconfiguration BS count".into(),
        });
    }
    let mut cost = 0.0;
    for n in 0..prev.num_bs() {
        for k in 0..NUM_SERVICES {
            let ds = next.spectrum[n][k] as f64 - prev.spectrum[n][k] as f64;
            let dc = next.compute[n][k] as f64 - prev.compute[n][k] as f64;
            cost += weights.reconfiguration_spectrum * ds.max(0.0)
                + weights.reconfiguration_compute * dc.max(0.0);
        }
    }
    Ok(cost)
}

/// Deadline penalty: fires strictly above the deadline. An infinite delay
/// (unstable queue) always violates.
pub fn violation_cost(delay_s: f64, deadline_s: f64, weights: &CostWeights) -> f64 {
    if delay_s > deadline_s {
        weights.violation
    } else {
        0.0
    }
}

/// Revenue for finishing under the deadline.
pub fn revenue(delay_s: f64, deadline_s: f64, weights: &CostWeights) -> f64 {
    weights.revenue * (deadline_s - delay_s).max(0.0)
}

/// The four components of one window's cost.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
pub struct CostBreakdown {
    pub operation: f64,
    pub reconfiguration: f64,
    pub violation: f64,
    pub revenue: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        total_cost(self)
    }
}

/// Overall window cost: operation + reconfiguration + violation - revenue.
pub fn total_cost(components: &CostBreakdown) -> f64 {
    components.operation + components.reconfiguration + components.violation - components.revenue
}

/// Assemble the full breakdown for one window.
pub fn window_cost(
    prev: &SlicingDecision,
    next: &SlicingDecision,
    delay_s: f64,
    deadline_s: f64,
    weights: &CostWeights,
) -> Result<CostBreakdown> {
    Ok(CostBreakdown {
        operation: operation_cost(next, weights),
        reconfiguration: reconfiguration_cost(prev, next, weights)?,
        violation: violation_cost(delay_s, deadline_s, weights),
        revenue: revenue(delay_s, deadline_s, weights),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w() -> CostWeights {
        CostWeights::default()
    }

    #[test]
    fn operation_cost_examples() {
        let d = SlicingDecision::uniform(5, 0, 2, 2);
        assert_eq!(operation_cost(&d, &w()), 40.0);
        let ones = SlicingDecision::all_ones(5, 0);
        assert_eq!(operation_cost(&ones, &w()), 20.0);
    }

    #[test]
    fn operation_cost_matches_independent_sum() {
        let mut d = SlicingDecision::uniform(3, 0, 1, 1);
        d.spectrum[0] = [4, 2];
        d.spectrum[1] = [7, 1];
        d.compute[2] = [5, 9];
        let weights = CostWeights {
            operation_spectrum: 1.5,
            operation_compute: 2.5,
            ..w()
        };
        let mut expect = 0.0;
        for n in 0..3 {
            for k in 0..2 {
                expect += 1.5 * d.spectrum[n][k] as f64 + 2.5 * d.compute[n][k] as f64;
            }
        }
        assert_eq!(operation_cost(&d, &weights), expect);
    }

    #[test]
    fn reconfiguration_single_increase() {
        let prev = SlicingDecision::uniform(2, 0, 2, 2);
        let mut next = prev.clone();
        next.spectrum[0][0] = 3;
        assert_eq!(reconfiguration_cost(&prev, &next, &w()).unwrap(), 5.0);
    }

    #[test]
    fn reconfiguration_decrease_is_free() {
        let prev = SlicingDecision::uniform(2, 0, 5, 5);
        let mut next = prev.clone();
        next.spectrum[0][0] = 1;
        next.compute[1][1] = 2;
        assert_eq!(reconfiguration_cost(&prev, &next, &w()).unwrap(), 0.0);
    }

    #[test]
    fn reconfiguration_identity_is_zero() {
        let d = SlicingDecision::uniform(4, 3, 6, 7);
        assert_eq!(reconfiguration_cost(&d, &d, &w()).unwrap(), 0.0);
    }

    #[test]
    fn reconfiguration_dimension_mismatch() {
        let a = SlicingDecision::uniform(2, 0, 1, 1);
        let b = SlicingDecision::uniform(3, 0, 1, 1);
        assert!(reconfiguration_cost(&a, &b, &w()).is_err());
    }

    #[test]
    fn violation_fires_strictly_above_deadline() {
        assert_eq!(violation_cost(0.12, 0.1, &w()), 200.0);
        assert_eq!(violation_cost(0.1, 0.1, &w()), 0.0);
        assert_eq!(violation_cost(f64::INFINITY, 0.1, &w()), 200.0);
    }

    #[test]
    fn revenue_hinges_at_deadline() {
        assert!((revenue(0.08, 0.1, &w()) - 0.5).abs() < 1e-12);
        assert_eq!(revenue(0.1, 0.1, &w()), 0.0);
        assert_eq!(revenue(0.15, 0.1, &w()), 0.0);
        assert_eq!(revenue(0.0, 0.1, &w()), 2.5);
        assert_eq!(revenue(f64::INFINITY, 0.1, &w()), 0.0);
    }

    #[test]
    fn total_is_sum_minus_revenue() {
        let c = CostBreakdown {
            operation: 40.0,
            reconfiguration: 5.0,
            violation: 0.0,
            revenue: 0.5,
        };
        assert_eq!(total_cost(&c), 44.5);
        assert_eq!(total_cost(&CostBreakdown::default()), 0.0);
    }

    #[test]
    fn total_cost_monotonicity() {
        let base = CostBreakdown {
            operation: 10.0,
            reconfiguration: 2.0,
            violation: 0.0,
            revenue: 1.0,
        };
        for (op, rc, vi, rv) in [
            (11.0, 2.0, 0.0, 1.0),
            (10.0, 3.0, 0.0, 1.0),
            (10.0, 2.0, 200.0, 1.0),
        ] {
            let c = CostBreakdown {
                operation: op,
                reconfiguration: rc,
                violation: vi,
                revenue: rv,
            };
            assert!(total_cost(&c) >= total_cost(&base));
        }
        let more_revenue = CostBreakdown {
            revenue: 2.0,
            ..base
        };
        assert!(total_cost(&more_revenue) <= total_cost(&base));
    }

    #[test]
    fn reconfiguration_is_nonnegative() {
        let mut prev = SlicingDecision::uniform(3, 0, 4, 4);
        let mut next = SlicingDecision::uniform(3, 0, 4, 4);
        prev.spectrum[1][0] = 9;
        next.compute[2][1] = 11;
        assert!(reconfiguration_cost(&prev, &next, &w()).unwrap() >= 0.0);
        assert!(reconfiguration_cost(&next, &prev, &w()).unwrap() >= 0.0);
    }
}
