//! The slicing MDP: state encoding, capacity-safe action decoding, the
//! per-window step with the workload-distribution layer embedded, and the
//! decision-shaping fixup used by the separated-decision baselines.
//!
//! One step covers one slicing window: build the window's load profile,
//! decode the allocation, choose splits (solver, equal split, shaped equal
//! split, or caller-provided), price the window, and emit the reward
//! `-(U * [u feasible] + w_f * #infeasible)`.

use crate::cost::{window_cost, CostBreakdown, CostWeights, SlicingDecision};
use crate::error::{Error, Result};
use crate::inner::{solve_delay_sensitive, solve_delay_tolerant, InnerInstance};
use crate::service::{
    average_service_delay, build_load_profile, check_stability, handover_delay, LoadProfile,
    RadioConfig, Services,
};
use crate::topology::Topology;
use crate::traffic::TrafficWindow;
use crate::{NUM_SERVICES, SENSITIVE, TOLERANT};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Actor output group width: one simplex entry per service plus slack.
pub const GROUP: usize = NUM_SERVICES + 1;

/// Flat action dimension for `n_bs` base stations (spectrum groups then
/// compute groups).
pub fn action_dim(n_bs: usize) -> usize {
    2 * n_bs * GROUP
}

/// Flat state dimension: zone densities plus previous allocations.
pub fn state_dim(n_zones: usize, n_bs: usize) -> usize {
    n_zones + 2 * n_bs * NUM_SERVICES
}

/// Decode simplex fractions into integer allocations.
///
/// Entry `k` of each group becomes `max(1, floor(x_k * capacity))`; the
/// trailing slack entry is discarded. The floor keeps group sums within
/// capacity for any simplex input; saturated outputs that still overflow
/// (only possible when some entry was clamped up to 1) are repaired by
/// draining the largest entries, so the capacity invariant holds
/// unconditionally.
pub fn decode_action(
    fractions: &[f64],
    n_bs: usize,
    spectrum_capacity: u32,
    compute_capacity: u32,
) -> Result<(Vec<[u32; NUM_SERVICES]>, Vec<[u32; NUM_SERVICES]>)> {
    let expected = action_dim(n_bs);
    if fractions.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: fractions.len(),
            context: "action fractions".into(),
        });
    }
    for (cap, name) in [(spectrum_capacity, "spectrum"), (compute_capacity, "compute")] {
        if (cap as usize) < NUM_SERVICES {
            let _ = name;
            return Err(Error::CapacityImpossible {
                capacity: cap,
                services: NUM_SERVICES,
            });
        }
    }
    let decode_group = |xs: &[f64], cap: u32| -> [u32; NUM_SERVICES] {
        let mut alloc = [0u32; NUM_SERVICES];
        let mut total = 0u32;
        for k in 0..NUM_SERVICES {
            let units = (xs[k] * cap as f64 + 1e-9).floor().max(0.0) as u32;
            alloc[k] = units.max(1).min(cap);
            total += alloc[k];
        }
        while total > cap {
            // Drain the largest entry (ties to the lower service index).
            let mut idx = 0;
            for k in 1..NUM_SERVICES {
                if alloc[k] > alloc[idx] {
                    idx = k;
                }
            }
            debug_assert!(alloc[idx] > 1);
            alloc[idx] -= 1;
            total -= 1;
        }
        alloc
    };
    let mut spectrum = Vec::with_capacity(n_bs);
    let mut compute = Vec::with_capacity(n_bs);
    for n in 0..n_bs {
        spectrum.push(decode_group(
            &fractions[n * GROUP..(n + 1) * GROUP],
            spectrum_capacity,
        ));
        compute.push(decode_group(
            &fractions[(n_bs + n) * GROUP..(n_bs + n + 1) * GROUP],
            compute_capacity,
        ));
    }
    Ok((spectrum, compute))
}

/// Normalized observation: densities over the jam density, then previous
/// spectrum and compute allocations over their capacities.
pub fn encode_state(
    densities: &[f64],
    max_density: f64,
    prev: &SlicingDecision,
    spectrum_capacity: u32,
    compute_capacity: u32,
) -> Vec<f64> {
    let mut s = Vec::with_capacity(state_dim(densities.len(), prev.num_bs()));
    for &rho in densities {
        s.push(rho / max_density);
    }
    for row in &prev.spectrum {
        for k in 0..NUM_SERVICES {
            s.push(row[k] as f64 / spectrum_capacity as f64);
        }
    }
    for row in &prev.compute {
        for k in 0..NUM_SERVICES {
            s.push(row[k] as f64 / compute_capacity as f64);
        }
    }
    s
}

/// Raise allocations to the coupled-constraint bounds at a fixed split, then
/// clip back to capacity by reducing the other service (never below one
/// unit). Families are processed in constraint order: delay-sensitive
/// spectrum, delay-sensitive compute, then the delay-tolerant pair, so a
/// later fixup may undo an earlier one; whatever remains violated is
/// reported per service.
pub fn shape_decision(
    profile: &LoadProfile,
    decision: &SlicingDecision,
    spectrum_capacity: u32,
    compute_capacity: u32,
) -> (SlicingDecision, [bool; NUM_SERVICES]) {
    let mut shaped = decision.clone();
    let n_bs = profile.num_bs();
    for k in [SENSITIVE, TOLERANT] {
        let split = shaped.split_column(k);
        let transfer: Vec<f64> = (0..n_bs)
            .map(|n| {
                split
                    .iter()
                    .enumerate()
                    .map(|(o, &b)| profile.transfer_rate(o, n, k) * b)
                    .sum()
            })
            .collect();
        for (is_spectrum, cap) in [(true, spectrum_capacity), (false, compute_capacity)] {
            for n in 0..n_bs {
                let bound = if is_spectrum {
                    profile.spectrum_demand[n][k] + profile.spectrum_task_time[n][k] * transfer[n]
                } else {
                    profile.compute_demand[n][k] + profile.compute_task_time[k] * transfer[n]
                };
                let alloc = if is_spectrum {
                    &mut shaped.spectrum[n]
                } else {
                    &mut shaped.compute[n]
                };
                if (alloc[k] as f64) < bound {
                    let most = cap - (NUM_SERVICES as u32 - 1);
                    let req = (bound - 1e-9).ceil().max(1.0);
                    alloc[k] = if req > most as f64 { most } else { req as u32 };
                    let other = 1 - k;
                    if alloc[k] + alloc[other] > cap {
                        alloc[other] = cap - alloc[k];
                    }
                }
            }
        }
    }
    let report = check_stability(profile, &shaped);
    let failed = [
        !report.service_ok(SENSITIVE),
        !report.service_ok(TOLERANT),
    ];
    (shaped, failed)
}

/// How the environment fills the split part of the decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitPolicy {
    /// Inner convex solver per service.
    Optimized,
    /// Fixed equal split.
    EqualSplit,
    /// Fixed equal split plus decision shaping of the allocation.
    EqualSplitShaped,
}

/// Static configuration of one environment.
#[derive(Debug, Clone)]
pub struct EnvSetup {
    pub topology: Topology,
    pub services: Services,
    pub radio: RadioConfig,
    pub rates_bps: Vec<f64>,
    pub weights: CostWeights,
    pub spectrum_capacity: u32,
    pub compute_capacity: u32,
    pub max_density: f64,
    pub episode_len: usize,
}

/// An action handed to [`SliceEnv::step`]: actor fractions plus an optional
/// explicit split (used by the random baseline; learned policies leave it to
/// the environment's split policy).
#[derive(Debug, Clone)]
pub struct EnvAction {
    pub fractions: Vec<f64>,
    pub split_override: Option<Vec<[f64; NUM_SERVICES]>>,
}

/// Everything observable about one executed window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepInfo {
    pub window_index: usize,
    /// Average delay of the delay-sensitive service; infinite when its
    /// subproblem is infeasible or a queue sits on the stability boundary.
    pub delay_s: f64,
    pub cost: CostBreakdown,
    pub total_cost: f64,
    pub feasible: [bool; NUM_SERVICES],
    pub split: Vec<[f64; NUM_SERVICES]>,
    /// Deadline exceeded or any stability constraint violated.
    pub violated: bool,
    /// Per service: shaping could not restore the coupled constraints.
    pub shaping_failed: [bool; NUM_SERVICES],
    pub spectrum: Vec<[u32; NUM_SERVICES]>,
    pub compute: Vec<[u32; NUM_SERVICES]>,
}

impl StepInfo {
    /// Split matrix flattened zone-major for the critic input.
    pub fn split_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.split.len() * NUM_SERVICES);
        for row in &self.split {
            v.extend_from_slice(row);
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub info: StepInfo,
}

/// The slicing environment over a fixed trace. Episodes are
/// `setup.episode_len` consecutive windows starting wherever `reset` points;
/// the window after the last one wraps around the trace for the terminal
/// observation.
pub struct SliceEnv {
    pub setup: EnvSetup,
    trace: Arc<Vec<TrafficWindow>>,
    split_policy: SplitPolicy,
    cursor: usize,
    steps_done: usize,
    prev: SlicingDecision,
    done: bool,
}

impl SliceEnv {
    pub fn new(
        setup: EnvSetup,
        trace: Arc<Vec<TrafficWindow>>,
        split_policy: SplitPolicy,
    ) -> Result<Self> {
        if trace.is_empty() {
            return Err(Error::EmptyTrace);
        }
        for (cap, field) in [
            (setup.spectrum_capacity, "capacity.spectrum_max"),
            (setup.compute_capacity, "capacity.compute_max"),
        ] {
            if (cap as usize) < NUM_SERVICES {
                return Err(Error::Config {
                    field: field.into(),
                    message: format!("must be at least the number of services ({NUM_SERVICES})"),
                });
            }
        }
        let n_bs = setup.topology.num_bs();
        let n_over = setup.topology.num_overlapped();
        Ok(SliceEnv {
            setup,
            trace,
            split_policy,
            cursor: 0,
            steps_done: 0,
            prev: SlicingDecision::all_ones(n_bs, n_over),
            done: true,
        })
    }

    pub fn split_policy(&self) -> SplitPolicy {
        self.split_policy
    }

    pub fn trace_len(&self) -> usize {
        self.trace.len()
    }

    pub fn state_dim(&self) -> usize {
        state_dim(self.setup.topology.num_zones, self.setup.topology.num_bs())
    }

    pub fn action_dim(&self) -> usize {
        action_dim(self.setup.topology.num_bs())
    }

    pub fn split_flat_dim(&self) -> usize {
        self.setup.topology.num_overlapped() * NUM_SERVICES
    }

    fn state_at(&self, window: usize) -> Vec<f64> {
        encode_state(
            &self.trace[window % self.trace.len()].densities,
            self.setup.max_density,
            &self.prev,
            self.setup.spectrum_capacity,
            self.setup.compute_capacity,
        )
    }

    /// Start an episode at `start_window`; previous allocations reset to the
    /// minimum legal decision.
    pub fn reset(&mut self, start_window: usize) -> Result<Vec<f64>> {
        if self.trace.is_empty() {
            return Err(Error::EmptyTrace);
        }
        self.cursor = start_window % self.trace.len();
        self.steps_done = 0;
        self.prev = SlicingDecision::all_ones(
            self.setup.topology.num_bs(),
            self.setup.topology.num_overlapped(),
        );
        self.done = false;
        Ok(self.state_at(self.cursor))
    }

    pub fn step(&mut self, action: &EnvAction) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EndOfTrace {
                windows: self.steps_done,
            });
        }
        let setup = &self.setup;
        let window = &self.trace[self.cursor];
        let (spectrum, compute) = decode_action(
            &action.fractions,
            setup.topology.num_bs(),
            setup.spectrum_capacity,
            setup.compute_capacity,
        )?;
        let profile = build_load_profile(
            &setup.topology,
            window,
            &setup.services,
            &setup.radio,
            &setup.rates_bps,
        );
        let handover = handover_delay(
            &setup.topology,
            window,
            setup.services.specs[SENSITIVE].arrival_rate_per_vehicle,
            setup.radio.handover_delay_s,
        )?;

        let mut decision = SlicingDecision {
            spectrum,
            compute,
            split: vec![[0.5; NUM_SERVICES]; setup.topology.num_overlapped()],
        };
        let mut feasible = [false; NUM_SERVICES];
        let mut shaping_failed = [false; NUM_SERVICES];
        let mut delay = f64::INFINITY;

        if let Some(split) = &action.split_override {
            decision.split = split.clone();
            let report = check_stability(&profile, &decision);
            feasible = [report.service_ok(SENSITIVE), report.service_ok(TOLERANT)];
            delay = self.benchmark_delay(&profile, &decision, window, feasible[SENSITIVE])?;
        } else {
            match self.split_policy {
                SplitPolicy::Optimized => {
                    let inst_u =
                        InnerInstance::from_profile(&profile, SENSITIVE, &decision, handover);
                    let sol_u = solve_delay_sensitive(&inst_u)?;
                    decision.set_split_column(SENSITIVE, &sol_u.beta);
                    feasible[SENSITIVE] = sol_u.feasible;
                    let inst_e =
                        InnerInstance::from_profile(&profile, TOLERANT, &decision, handover);
                    let sol_e = solve_delay_tolerant(&inst_e);
                    decision.set_split_column(TOLERANT, &sol_e.beta);
                    feasible[TOLERANT] = sol_e.feasible;
                    if sol_u.feasible {
                        delay = sol_u.objective_delay_s.unwrap_or(f64::INFINITY);
                    }
                }
                SplitPolicy::EqualSplit => {
                    let report = check_stability(&profile, &decision);
                    feasible = [report.service_ok(SENSITIVE), report.service_ok(TOLERANT)];
                    delay =
                        self.benchmark_delay(&profile, &decision, window, feasible[SENSITIVE])?;
                }
                SplitPolicy::EqualSplitShaped => {
                    let (shaped, failed) = shape_decision(
                        &profile,
                        &decision,
                        setup.spectrum_capacity,
                        setup.compute_capacity,
                    );
                    decision = shaped;
                    shaping_failed = failed;
                    let report = check_stability(&profile, &decision);
                    feasible = [report.service_ok(SENSITIVE), report.service_ok(TOLERANT)];
                    delay =
                        self.benchmark_delay(&profile, &decision, window, feasible[SENSITIVE])?;
                }
            }
        }

        let cost = window_cost(
            &self.prev,
            &decision,
            delay,
            setup.services.deadline_s(),
            &setup.weights,
        )?;
        let total = cost.total();
        let infeasible_count = feasible.iter().filter(|f| !**f).count() as f64;
        let reward = -(total * if feasible[SENSITIVE] { 1.0 } else { 0.0 }
            + setup.weights.infeasibility * infeasible_count);

        let violated =
            !feasible[SENSITIVE] || !feasible[TOLERANT] || delay > setup.services.deadline_s();

        let info = StepInfo {
            window_index: window.window_index,
            delay_s: delay,
            cost,
            total_cost: total,
            feasible,
            split: decision.split.clone(),
            violated,
            shaping_failed,
            spectrum: decision.spectrum.clone(),
            compute: decision.compute.clone(),
        };

        self.prev = decision;
        self.cursor = (self.cursor + 1) % self.trace.len();
        self.steps_done += 1;
        if self.steps_done >= self.setup.episode_len {
            self.done = true;
        }
        let next_state = self.state_at(self.cursor);
        Ok(StepOutcome {
            reward,
            next_state,
            info,
        })
    }

    /// The split the inner layer would choose for `fractions` in the traffic
    /// situation encoded by `state`, flattened zone-major. Used by the actor
    /// update to score a candidate allocation together with the split it
    /// would actually trigger; the handover term is irrelevant to the split
    /// choice and is left at zero.
    pub fn split_response(&self, state: &[f64], fractions: &[f64]) -> Result<Vec<f64>> {
        let setup = &self.setup;
        let n_over = setup.topology.num_overlapped();
        let mut decision = {
            let (spectrum, compute) = decode_action(
                fractions,
                setup.topology.num_bs(),
                setup.spectrum_capacity,
                setup.compute_capacity,
            )?;
            SlicingDecision {
                spectrum,
                compute,
                split: vec![[0.5; NUM_SERVICES]; n_over],
            }
        };
        if self.split_policy == SplitPolicy::Optimized && n_over > 0 {
            let densities: Vec<f64> = state[..setup.topology.num_zones]
                .iter()
                .map(|x| x * setup.max_density)
                .collect();
            let window = TrafficWindow {
                window_index: 0,
                densities,
                velocities: Vec::new(),
            };
            let profile = build_load_profile(
                &setup.topology,
                &window,
                &setup.services,
                &setup.radio,
                &setup.rates_bps,
            );
            let inst_u = InnerInstance::from_profile(&profile, SENSITIVE, &decision, 0.0);
            let sol_u = solve_delay_sensitive(&inst_u)?;
            decision.set_split_column(SENSITIVE, &sol_u.beta);
            let inst_e = InnerInstance::from_profile(&profile, TOLERANT, &decision, 0.0);
            let sol_e = solve_delay_tolerant(&inst_e);
            decision.set_split_column(TOLERANT, &sol_e.beta);
        }
        let mut flat = Vec::with_capacity(n_over * NUM_SERVICES);
        for row in &decision.split {
            flat.extend_from_slice(row);
        }
        Ok(flat)
    }

    /// Delay of the delay-sensitive service for a fixed split decision; an
    /// exactly-boundary queue shows up as infinite delay rather than an error.
    fn benchmark_delay(
        &self,
        profile: &LoadProfile,
        decision: &SlicingDecision,
        window: &TrafficWindow,
        feasible_u: bool,
    ) -> Result<f64> {
        if !feasible_u {
            return Ok(f64::INFINITY);
        }
        match average_service_delay(
            profile,
            decision,
            &self.setup.topology,
            window,
            &self.setup.services,
            &self.setup.radio,
        ) {
            Ok(d) => Ok(d),
            Err(Error::UnstableQueue { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::transmission_rates;
    use crate::service::ServiceSpec;
    use crate::topology::build_topology;
    use crate::traffic::{FlowModel, TrafficWindow};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn table_services(lambda_u: f64) -> Services {
        Services {
            specs: [
                ServiceSpec {
                    task_size_bits: 0.6e6,
                    compute_cycles_per_task: 6.0e8,
                    arrival_rate_per_vehicle: lambda_u,
                    max_delay_s: Some(0.1),
                },
                ServiceSpec {
                    task_size_bits: 2.0e6,
                    compute_cycles_per_task: 2.0e8,
                    arrival_rate_per_vehicle: 1.0,
                    max_delay_s: None,
                },
            ],
        }
    }

    fn small_setup(rho: f64) -> (EnvSetup, Arc<Vec<TrafficWindow>>) {
        let topology = build_topology(1.0, 0.5, &[0.5], 0.8).unwrap();
        let radio = RadioConfig {
            subcarrier_bandwidth_hz: 10.0e6,
            vm_cpu_hz: 10.0e9,
            handover_delay_s: 0.2,
            tx_power_w: 0.5,
            noise_dbm_per_hz: -174.0,
            rate_override_bps: None,
        };
        let rates = transmission_rates(&radio, &topology);
        let flow = FlowModel {
            free_flow_speed_kmh: 120.0,
            max_density_veh_km: 120.0,
        };
        let windows: Vec<TrafficWindow> = (0..48)
            .map(|t| TrafficWindow {
                window_index: t,
                densities: vec![rho; topology.num_zones],
                velocities: vec![
                    flow.free_flow_speed_kmh * (1.0 - rho / flow.max_density_veh_km);
                    topology.num_zones
                ],
            })
            .collect();
        (
            EnvSetup {
                topology,
                services: table_services(1.0),
                radio,
                rates_bps: rates,
                weights: CostWeights::default(),
                spectrum_capacity: 18,
                compute_capacity: 18,
                max_density: 120.0,
                episode_len: 24,
            },
            Arc::new(windows),
        )
    }

    fn uniform_fractions(n_bs: usize) -> Vec<f64> {
        vec![1.0 / GROUP as f64; action_dim(n_bs)]
    }

    #[test]
    fn decode_examples() {
        let third = vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let (s, c) = decode_action(&third, 1, 18, 18).unwrap();
        assert_eq!(s[0], [6, 6]);
        assert_eq!(c[0], [6, 6]);

        let skew = vec![0.5, 0.25, 0.25, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let (s, _) = decode_action(&skew, 1, 18, 18).unwrap();
        assert_eq!(s[0], [9, 4]);

        let tiny = vec![0.01, 0.01, 0.98, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let (s, _) = decode_action(&tiny, 1, 18, 18).unwrap();
        assert_eq!(s[0], [1, 1]);
    }

    #[test]
    fn decode_repairs_saturated_group() {
        // x = (0, 1, 0) would clamp to (1, 18): the repair drains it to 17.
        let sat = vec![0.0, 1.0, 0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let (s, _) = decode_action(&sat, 1, 18, 18).unwrap();
        assert_eq!(s[0][0] + s[0][1], 18);
        assert!(s[0].iter().all(|&x| x >= 1));
    }

    #[test]
    fn decode_respects_capacity_for_random_simplex_points() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        for _ in 0..2000 {
            let mut fr = Vec::with_capacity(action_dim(3));
            for _ in 0..2 * 3 {
                let mut g = [0.0; GROUP];
                let mut sum = 0.0;
                for x in g.iter_mut() {
                    *x = -(rng.random::<f64>()).ln();
                    sum += *x;
                }
                for x in g.iter_mut() {
                    *x /= sum;
                }
                fr.extend_from_slice(&g);
            }
            let (s, c) = decode_action(&fr, 3, 18, 18).unwrap();
            for n in 0..3 {
                assert!(s[n][0] + s[n][1] <= 18);
                assert!(c[n][0] + c[n][1] <= 18);
                assert!(s[n].iter().all(|&x| x >= 1));
                assert!(c[n].iter().all(|&x| x >= 1));
            }
        }
    }

    #[test]
    fn capacity_below_service_count_is_impossible() {
        let fr = uniform_fractions(1);
        assert!(matches!(
            decode_action(&fr, 1, 1, 18),
            Err(Error::CapacityImpossible { .. })
        ));
    }

    #[test]
    fn reset_state_encodes_all_ones_and_densities() {
        let (setup, trace) = small_setup(120.0);
        let mut env = SliceEnv::new(setup, trace, SplitPolicy::Optimized).unwrap();
        let s = env.reset(0).unwrap();
        // Density part saturated at 1.0.
        assert!(s[..2].iter().all(|&x| x == 1.0));
        // Previous allocations at the all-ones reset: 1/18.
        for &x in &s[2..] {
            assert_relative_eq!(x, 1.0 / 18.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn double_infeasibility_rewards_minus_two_penalties() {
        // One BS, heavy load, rates so poor that no allocation inside
        // capacity can stabilize either service.
        let (mut setup, _) = small_setup(0.0);
        setup.radio.rate_override_bps = Some(vec![0.6e6]); // 1 task/s per subcarrier for u
        setup.rates_bps = vec![0.6e6];
        let flow_v = 120.0 * (1.0 - 100.0 / 120.0);
        let trace = Arc::new(vec![TrafficWindow {
            window_index: 0,
            densities: vec![100.0, 100.0],
            velocities: vec![flow_v, flow_v],
        }]);
        let mut env = SliceEnv::new(setup, trace, SplitPolicy::Optimized).unwrap();
        env.reset(0).unwrap();
        let out = env
            .step(&EnvAction {
                fractions: uniform_fractions(1),
                split_override: None,
            })
            .unwrap();
        assert_eq!(out.reward, -400.0);
        assert_eq!(out.info.feasible, [false, false]);
        assert!(out.info.violated);
        assert!(out.info.delay_s.is_infinite());
    }

    #[test]
    fn feasible_reward_is_minus_total_cost() {
        let (setup, trace) = small_setup(20.0);
        let mut env = SliceEnv::new(setup, trace, SplitPolicy::Optimized).unwrap();
        env.reset(0).unwrap();
        let out = env
            .step(&EnvAction {
                fractions: uniform_fractions(1),
                split_override: None,
            })
            .unwrap();
        assert_eq!(out.info.feasible, [true, true]);
        assert_relative_eq!(out.reward, -out.info.total_cost, max_relative = 1e-12);
        assert!(!out.info.violated);
    }

    #[test]
    fn zero_load_cost_is_exact() {
        let (mut setup, _) = small_setup(0.0);
        setup.weights.revenue = 0.0; // exact integer arithmetic
        let trace = Arc::new(vec![TrafficWindow {
            window_index: 0,
            densities: vec![0.0, 0.0],
            velocities: vec![120.0, 120.0],
        }]);
        let mut env = SliceEnv::new(setup, trace, SplitPolicy::Optimized).unwrap();
        env.reset(0).unwrap();
        let out = env
            .step(&EnvAction {
                fractions: uniform_fractions(1),
                split_override: None,
            })
            .unwrap();
        // Decode gives S = C = (6,6): operation 24, reconfiguration from the
        // all-ones reset: (5+5)*(5+5) = 100 at weight 5... each of 4 entries
        // grows by 5 units at weight 5 -> 100. Total 124.
        assert_eq!(out.info.cost.operation, 24.0);
        assert_eq!(out.info.cost.reconfiguration, 100.0);
        assert_eq!(out.info.cost.violation, 0.0);
        assert_eq!(out.info.cost.revenue, 0.0);
        assert_eq!(out.reward, -124.0);
    }

    #[test]
    fn mixed_feasibility_adds_one_penalty() {
        // Make the delay-tolerant service impossible (enormous task size)
        // while the delay-sensitive stays easy; zero revenue keeps the
        // numbers exact.
        let (mut setup, _) = small_setup(0.0);
        setup.weights.revenue = 0.0;
        setup.services.specs[TOLERANT].task_size_bits = 1.0e12;
        let flow_v = 120.0 * (1.0 - 20.0 / 120.0);
        let trace = Arc::new(vec![TrafficWindow {
            window_index: 0,
            densities: vec![20.0, 20.0],
            velocities: vec![flow_v, flow_v],
        }]);
        let mut env = SliceEnv::new(setup, trace, SplitPolicy::Optimized).unwrap();
        env.reset(0).unwrap();
        let out = env
            .step(&EnvAction {
                fractions: uniform_fractions(1),
                split_override: None,
            })
            .unwrap();
        assert_eq!(out.info.feasible, [true, false]);
        // U = 24 (operation) + 100 (reconfiguration) + 0 - 0 = 124;
        // reward = -(124 + 200) = -324.
        assert_eq!(out.reward, -324.0);
    }

    #[test]
    fn episode_terminates_after_episode_len() {
        let (setup, trace) = small_setup(10.0);
        let mut env = SliceEnv::new(setup, trace, SplitPolicy::EqualSplit).unwrap();
        env.reset(0).unwrap();
        let a = EnvAction {
            fractions: uniform_fractions(1),
            split_override: None,
        };
        for _ in 0..24 {
            env.step(&a).unwrap();
        }
        assert!(matches!(env.step(&a), Err(Error::EndOfTrace { .. })));
    }

    #[test]
    fn episodes_are_deterministic() {
        let (setup, trace) = small_setup(35.0);
        let mut env1 = SliceEnv::new(setup.clone(), trace.clone(), SplitPolicy::Optimized).unwrap();
        let mut env2 = SliceEnv::new(setup, trace, SplitPolicy::Optimized).unwrap();
        env1.reset(5).unwrap();
        env2.reset(5).unwrap();
        let a = EnvAction {
            fractions: uniform_fractions(1),
            split_override: None,
        };
        for _ in 0..10 {
            let o1 = env1.step(&a).unwrap();
            let o2 = env2.step(&a).unwrap();
            assert_eq!(o1.reward, o2.reward);
            assert_eq!(o1.next_state, o2.next_state);
            assert_eq!(o1.info.split, o2.info.split);
        }
    }

    /// Services where the delay-tolerant slice is nearly free, so shaping
    /// tests exercise one constraint family at a time.
    fn services_with_light_tolerant() -> Services {
        let mut s = table_services(1.0);
        s.specs[TOLERANT].task_size_bits = 0.01e6;
        s.specs[TOLERANT].compute_cycles_per_task = 1.0e6;
        s.specs[TOLERANT].arrival_rate_per_vehicle = 0.01;
        s
    }

    #[test]
    fn shaping_raises_to_ceiling_and_keeps_feasible_actions_fixed() {
        // Two BSs with overlapped zones; beta fixed at 0.5.
        let topology = build_topology(2.0, 0.5, &[0.5, 1.5], 0.8).unwrap();
        let radio = RadioConfig {
            subcarrier_bandwidth_hz: 10.0e6,
            vm_cpu_hz: 10.0e9,
            handover_delay_s: 0.2,
            tx_power_w: 0.5,
            noise_dbm_per_hz: -174.0,
            rate_override_bps: Some(vec![0.6e6]), // 1 task/s per subcarrier (u)
        };
        let rates = vec![0.6e6, 0.6e6];
        let services = services_with_light_tolerant();
        let window = TrafficWindow {
            window_index: 0,
            densities: vec![8.4, 0.0, 0.0, 0.0],
            velocities: vec![100.0; 4],
        };
        let profile = build_load_profile(&topology, &window, &services, &radio, &rates);
        // Zone 0 is non-overlapped at BS 0 with 4.2 tasks/s of service u.
        assert_relative_eq!(
            profile.spectrum_demand[0][SENSITIVE],
            4.2,
            max_relative = 1e-9
        );
        let decision = SlicingDecision::uniform(2, topology.num_overlapped(), 3, 6);
        let (shaped, failed) = shape_decision(&profile, &decision, 18, 18);
        assert_eq!(shaped.spectrum[0][SENSITIVE], 5); // ceiling of the 4.2 bound
        assert!(!failed[SENSITIVE]);
        assert!(!failed[TOLERANT]);
        // Already-feasible decisions are fixed points.
        let (again, failed2) = shape_decision(&profile, &shaped, 18, 18);
        assert_eq!(again, shaped);
        assert!(!failed2.iter().any(|&f| f));
    }

    #[test]
    fn shaping_reports_impossible_when_capacity_exhausted() {
        let topology = build_topology(1.0, 0.5, &[0.5], 0.8).unwrap();
        let radio = RadioConfig {
            subcarrier_bandwidth_hz: 10.0e6,
            vm_cpu_hz: 10.0e9,
            handover_delay_s: 0.2,
            tx_power_w: 0.5,
            noise_dbm_per_hz: -174.0,
            rate_override_bps: Some(vec![0.6e6]),
        };
        let rates = vec![0.6e6];
        let services = services_with_light_tolerant();
        // 60 tasks/s of u demand against 17 subcarriers available to it.
        let window = TrafficWindow {
            window_index: 0,
            densities: vec![60.0, 60.0],
            velocities: vec![50.0, 50.0],
        };
        let profile = build_load_profile(&topology, &window, &services, &radio, &rates);
        let decision = SlicingDecision::uniform(1, 0, 1, 1);
        let (shaped, failed) = shape_decision(&profile, &decision, 18, 18);
        assert!(failed[SENSITIVE]);
        assert_eq!(shaped.spectrum[0][SENSITIVE], 17); // capped, still short
        assert_eq!(shaped.spectrum[0][TOLERANT], 1);
        assert!(shaped.spectrum[0][SENSITIVE] + shaped.spectrum[0][TOLERANT] <= 18);
    }

    #[test]
    fn shaping_is_order_dependent_when_capacity_binds_jointly() {
        // Both services want more than the capacity offers; the later family
        // (delay-tolerant) wins the sequential pass and the earlier one is
        // reported as still violated.
        let topology = build_topology(1.0, 0.5, &[0.5], 0.8).unwrap();
        let radio = RadioConfig {
            subcarrier_bandwidth_hz: 10.0e6,
            vm_cpu_hz: 10.0e9,
            handover_delay_s: 0.2,
            tx_power_w: 0.5,
            noise_dbm_per_hz: -174.0,
            rate_override_bps: Some(vec![0.6e6]),
        };
        let rates = vec![0.6e6];
        let services = table_services(1.0); // e needs 10/3 subcarriers per task/s
        let window = TrafficWindow {
            window_index: 0,
            densities: vec![16.0, 16.0],
            velocities: vec![80.0, 80.0],
        };
        // u demand: 16 subcarriers; e demand: 16 * 10/3 = 53.3 -> capped.
        let profile = build_load_profile(&topology, &window, &services, &radio, &rates);
        let decision = SlicingDecision::uniform(1, 0, 1, 1);
        let (shaped, failed) = shape_decision(&profile, &decision, 18, 18);
        assert_eq!(shaped.spectrum[0][TOLERANT], 17);
        assert_eq!(shaped.spectrum[0][SENSITIVE], 1);
        assert!(failed[SENSITIVE] && failed[TOLERANT]);
    }
}
