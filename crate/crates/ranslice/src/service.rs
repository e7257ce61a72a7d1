//! Queueing-side service model: task arrival aggregates per BS, average
//! transmission rates, the three delay components of the delay-sensitive
//! service, and queue-stability margins for both services.
//!
//! Offloading and processing queues are M/M/1. With service rate `mu` and
//! arrival rate `a`, the mean sojourn time is `1 / (mu - a)`; a denominator
//! at or below [`STABILITY_EPS`] reports an unstable queue instead of a
//! physically meaningless finite delay.

use crate::cost::SlicingDecision;
use crate::error::{Error, Result};
use crate::topology::{Topology, ZoneAssociation};
use crate::traffic::TrafficWindow;
use crate::{NUM_SERVICES, SENSITIVE};
use serde::{Deserialize, Serialize};

/// Queue denominators below this (tasks/s) count as unstable.
pub const STABILITY_EPS: f64 = 1e-9;

/// The log-distance path-loss model is not meaningful at very short range;
/// distances are floored here (km) before evaluating it. A zone center can
/// coincide exactly with a BS position.
pub const MIN_PATHLOSS_DISTANCE_KM: f64 = 0.035;

/// Three-parameter task model of one service slice.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ServiceSpec {
    /// Task data size, bits.
    pub task_size_bits: f64,
    /// Average CPU cycles per task.
    pub compute_cycles_per_task: f64,
    /// Task arrivals per vehicle, tasks/s.
    pub arrival_rate_per_vehicle: f64,
    /// Maximum tolerable delay in seconds; present only for the
    /// delay-sensitive service.
    pub max_delay_s: Option<f64>,
}

/// The two service slices: index [`SENSITIVE`] then [`TOLERANT`](crate::TOLERANT).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Services {
    pub specs: [ServiceSpec; NUM_SERVICES],
}

impl Services {
    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.specs.iter().enumerate() {
            if !(s.task_size_bits > 0.0
                && s.compute_cycles_per_task > 0.0
                && s.arrival_rate_per_vehicle > 0.0)
            {
                return Err(Error::Config {
                    field: format!("services[{k}]"),
                    message: "task size, compute intensity and arrival rate must be positive".into(),
                });
            }
            let wants_deadline = k == SENSITIVE;
            if wants_deadline != s.max_delay_s.is_some() {
                return Err(Error::Config {
                    field: format!("services[{k}].max_delay_s"),
                    message: "deadline must be set exactly for the delay-sensitive service".into(),
                });
            }
            if let Some(d) = s.max_delay_s {
                if !(d > 0.0) {
                    return Err(Error::Config {
                        field: format!("services[{k}].max_delay_s"),
                        message: "must be positive".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn deadline_s(&self) -> f64 {
        self.specs[SENSITIVE].max_delay_s.expect("validated")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RadioConfig {
    /// Subcarrier bandwidth, Hz.
    pub subcarrier_bandwidth_hz: f64,
    /// CPU frequency of one VM instance, Hz (cycles/s).
    pub vm_cpu_hz: f64,
    /// One-time handover delay, seconds.
    pub handover_delay_s: f64,
    pub tx_power_w: f64,
    pub noise_dbm_per_hz: f64,
    /// Optional explicit per-BS per-subcarrier rates (bps). When present it
    /// overrides the Shannon/path-loss derivation; a single entry applies to
    /// every BS.
    pub rate_override_bps: Option<Vec<f64>>,
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("radio.subcarrier_bandwidth_hz", self.subcarrier_bandwidth_hz),
            ("radio.vm_cpu_hz", self.vm_cpu_hz),
            ("radio.handover_delay_s", self.handover_delay_s),
            ("radio.tx_power_w", self.tx_power_w),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config {
                    field: name.into(),
                    message: "must be positive".into(),
                });
            }
        }
        if let Some(rates) = &self.rate_override_bps {
            if rates.iter().any(|&r| !(r > 0.0)) {
                return Err(Error::Config {
                    field: "radio.rate_override_bps".into(),
                    message: "rates must be positive".into(),
                });
            }
        }
        Ok(())
    }
}

/// Vehicular path loss in dB at distance `d_km`.
pub fn path_loss_db(d_km: f64) -> f64 {
    128.1 + 37.6 * d_km.max(MIN_PATHLOSS_DISTANCE_KM).log10()
}

/// Average per-subcarrier transmission rate of BS `bs` in bps.
///
/// Shannon rate at each covered zone center (tx power over path loss against
/// thermal noise in one subcarrier bandwidth), averaged over those centers.
/// An explicit override in the radio config wins.
pub fn compute_rate(radio: &RadioConfig, topology: &Topology, bs: usize) -> f64 {
    if let Some(rates) = &radio.rate_override_bps {
        return if rates.len() == 1 { rates[0] } else { rates[bs] };
    }
    let centers = topology.covered_zone_centers(bs);
    debug_assert!(!centers.is_empty(), "BS {bs} covers no zone");
    let w = radio.subcarrier_bandwidth_hz;
    let noise_w = 10f64.powf((radio.noise_dbm_per_hz - 30.0) / 10.0) * w;
    let pos = topology.bs_positions_km[bs];
    centers
        .iter()
        .map(|&c| {
            let pl_lin = 10f64.powf(path_loss_db((c - pos).abs()) / 10.0);
            let snr = radio.tx_power_w / pl_lin / noise_w;
            w * (1.0 + snr).log2()
        })
        .sum::<f64>()
        / centers.len() as f64
}

/// All per-BS rates for a topology.
pub fn transmission_rates(radio: &RadioConfig, topology: &Topology) -> Vec<f64> {
    (0..topology.num_bs())
        .map(|n| compute_rate(radio, topology, n))
        .collect()
}

/// Workload of one overlapped zone, split between its two associated BSs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct OverlapLoad {
    pub zone: usize,
    pub near_bs: usize,
    pub far_bs: usize,
    /// Zone workload per service, tasks/s. A split fraction `beta` sends
    /// `beta * rate` to `near_bs` and the rest to `far_bs`.
    pub rate: [f64; NUM_SERVICES],
}

/// Arrival constants derived from one traffic window.
///
/// `base_arrivals[n][k]` counts the tasks/s BS `n` receives regardless of the
/// split decision (its own non-overlapped zones plus the full workload of
/// overlapped zones for which it is the far BS); the transferable part is
/// carried by [`OverlapLoad`] entries.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LoadProfile {
    pub base_arrivals: Vec<[f64; NUM_SERVICES]>,
    pub overlap_loads: Vec<OverlapLoad>,
    /// Seconds of transmission per task per allocated subcarrier (task size
    /// over BS rate).
    pub spectrum_task_time: Vec<[f64; NUM_SERVICES]>,
    /// Seconds of CPU per task per allocated VM (cycles over VM frequency).
    pub compute_task_time: [f64; NUM_SERVICES],
    /// Subcarriers needed to carry the base arrivals alone.
    pub spectrum_demand: Vec<[f64; NUM_SERVICES]>,
    /// VM instances needed to process the base arrivals alone.
    pub compute_demand: Vec<[f64; NUM_SERVICES]>,
    /// Total road workload per service, tasks/s.
    pub total_workload: [f64; NUM_SERVICES],
}

impl LoadProfile {
    pub fn num_bs(&self) -> usize {
        self.base_arrivals.len()
    }

    pub fn num_overlapped(&self) -> usize {
        self.overlap_loads.len()
    }

    /// Signed transferable rate of overlapped zone `o` at BS `bs`: positive
    /// at the near BS, negative at the far BS, zero elsewhere.
    pub fn transfer_rate(&self, o: usize, bs: usize, service: usize) -> f64 {
        let l = &self.overlap_loads[o];
        if bs == l.near_bs {
            l.rate[service]
        } else if bs == l.far_bs {
            -l.rate[service]
        } else {
            0.0
        }
    }

    /// Task arrival rate at `bs` for `service` under split `split`
    /// (one fraction in [0,1] per overlapped zone).
    pub fn arrival_rate(&self, bs: usize, service: usize, split: &[f64]) -> f64 {
        debug_assert_eq!(split.len(), self.overlap_loads.len());
        let mut rate = self.base_arrivals[bs][service];
        for (o, l) in self.overlap_loads.iter().enumerate() {
            if bs == l.near_bs {
                rate += l.rate[service] * split[o];
            } else if bs == l.far_bs {
                rate -= l.rate[service] * split[o];
            }
        }
        rate
    }

    /// Offloading-queue service rate for an allocation of `units` subcarriers.
    pub fn spectrum_service_rate(&self, bs: usize, service: usize, units: u32) -> f64 {
        units as f64 / self.spectrum_task_time[bs][service]
    }

    /// Processing-queue service rate for an allocation of `units` VMs.
    pub fn compute_service_rate(&self, service: usize, units: u32) -> f64 {
        units as f64 / self.compute_task_time[service]
    }
}

/// Derive the per-window arrival constants from topology, traffic and services.
pub fn build_load_profile(
    topology: &Topology,
    window: &TrafficWindow,
    services: &Services,
    radio: &RadioConfig,
    rates_bps: &[f64],
) -> LoadProfile {
    let n_bs = topology.num_bs();
    assert_eq!(window.densities.len(), topology.num_zones, "window size");
    assert_eq!(rates_bps.len(), n_bs, "rate vector size");

    let zone_len = topology.zone_length_km;
    let mut base = vec![[0.0; NUM_SERVICES]; n_bs];
    let mut overlap_loads = Vec::with_capacity(topology.num_overlapped());
    let mut total = [0.0; NUM_SERVICES];

    for (m, assoc) in topology.associations.iter().enumerate() {
        let vehicles = window.densities[m] * zone_len;
        let mut zone_rate = [0.0; NUM_SERVICES];
        for k in 0..NUM_SERVICES {
            zone_rate[k] = services.specs[k].arrival_rate_per_vehicle * vehicles;
            total[k] += zone_rate[k];
        }
        match *assoc {
            ZoneAssociation::Single { bs } => {
                for k in 0..NUM_SERVICES {
                    base[bs][k] += zone_rate[k];
                }
            }
            ZoneAssociation::Pair { near, far } => {
                // The far BS carries the whole zone in the base term; the
                // transferable term moves beta*rate of it to the near BS.
                for k in 0..NUM_SERVICES {
                    base[far][k] += zone_rate[k];
                }
                overlap_loads.push(OverlapLoad {
                    zone: m,
                    near_bs: near,
                    far_bs: far,
                    rate: zone_rate,
                });
            }
        }
    }

    let mut compute_task_time = [0.0; NUM_SERVICES];
    for k in 0..NUM_SERVICES {
        compute_task_time[k] = services.specs[k].compute_cycles_per_task / radio.vm_cpu_hz;
    }
    let mut spectrum_task_time = vec![[0.0; NUM_SERVICES]; n_bs];
    let mut spectrum_demand = vec![[0.0; NUM_SERVICES]; n_bs];
    let mut compute_demand = vec![[0.0; NUM_SERVICES]; n_bs];
    for n in 0..n_bs {
        for k in 0..NUM_SERVICES {
            spectrum_task_time[n][k] = services.specs[k].task_size_bits / rates_bps[n];
            spectrum_demand[n][k] = spectrum_task_time[n][k] * base[n][k];
            compute_demand[n][k] = compute_task_time[k] * base[n][k];
        }
    }

    LoadProfile {
        base_arrivals: base,
        overlap_loads,
        spectrum_task_time,
        compute_task_time,
        spectrum_demand,
        compute_demand,
        total_workload: total,
    }
}

fn mm1_sojourn(service_rate: f64, arrival_rate: f64, bs: usize) -> Result<f64> {
    let margin = service_rate - arrival_rate;
    if margin <= STABILITY_EPS {
        return Err(Error::UnstableQueue {
            bs,
            service_rate,
            arrival_rate,
        });
    }
    Ok(1.0 / margin)
}

/// Mean task offloading delay at `bs` for `service` (seconds).
pub fn offload_delay(
    profile: &LoadProfile,
    service: usize,
    bs: usize,
    spectrum_units: u32,
    split: &[f64],
) -> Result<f64> {
    mm1_sojourn(
        profile.spectrum_service_rate(bs, service, spectrum_units),
        profile.arrival_rate(bs, service, split),
        bs,
    )
}

/// Mean task processing delay at `bs` for `service` (seconds).
pub fn process_delay(
    profile: &LoadProfile,
    service: usize,
    bs: usize,
    compute_units: u32,
    split: &[f64],
) -> Result<f64> {
    mm1_sojourn(
        profile.compute_service_rate(service, compute_units),
        profile.arrival_rate(bs, service, split),
        bs,
    )
}

/// Average handover delay per task: total handover time over the expected
/// number of tasks a vehicle generates while traversing the road.
pub fn handover_delay(
    topology: &Topology,
    window: &TrafficWindow,
    arrival_rate_per_vehicle: f64,
    one_time_delay_s: f64,
) -> Result<f64> {
    handover_delay_raw(
        topology.num_bs(),
        topology.zone_length_km,
        &window.velocities,
        arrival_rate_per_vehicle,
        one_time_delay_s,
    )
}

pub(crate) fn handover_delay_raw(
    num_handovers: usize,
    zone_length_km: f64,
    velocities_kmh: &[f64],
    arrival_rate_per_vehicle: f64,
    one_time_delay_s: f64,
) -> Result<f64> {
    if num_handovers == 0 {
        return Ok(0.0);
    }
    let mut sojourn_h = 0.0;
    for (m, &v) in velocities_kmh.iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::ZeroVelocity { zone: m });
        }
        sojourn_h += zone_length_km / v;
    }
    let sojourn_s = sojourn_h * 3600.0;
    Ok(one_time_delay_s * num_handovers as f64 / (arrival_rate_per_vehicle * sojourn_s))
}

/// Average delay of the delay-sensitive service under `decision`: handover
/// term plus the arrival-weighted sum of per-BS offloading and processing
/// sojourns. Returns the handover term alone when the road carries no
/// workload.
pub fn average_service_delay(
    profile: &LoadProfile,
    decision: &SlicingDecision,
    topology: &Topology,
    window: &TrafficWindow,
    services: &Services,
    radio: &RadioConfig,
) -> Result<f64> {
    let k = SENSITIVE;
    let handover = handover_delay(
        topology,
        window,
        services.specs[k].arrival_rate_per_vehicle,
        radio.handover_delay_s,
    )?;
    let total = profile.total_workload[k];
    if total <= 0.0 {
        return Ok(handover);
    }
    let split = decision.split_column(k);
    let mut weighted = 0.0;
    for n in 0..profile.num_bs() {
        let arrivals = profile.arrival_rate(n, k, &split);
        if arrivals == 0.0 {
            continue;
        }
        let d_o = offload_delay(profile, k, n, decision.spectrum[n][k], &split)?;
        let d_c = process_delay(profile, k, n, decision.compute[n][k], &split)?;
        weighted += arrivals / total * (d_o + d_c);
    }
    Ok(handover + weighted)
}

/// Stability margins for every queue, in resource units (subcarriers / VMs).
/// A queue is stable when its margin is nonnegative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub spectrum_margins: Vec<[f64; NUM_SERVICES]>,
    pub compute_margins: Vec<[f64; NUM_SERVICES]>,
}

impl StabilityReport {
    pub fn min_margin(&self) -> f64 {
        self.spectrum_margins
            .iter()
            .chain(self.compute_margins.iter())
            .flat_map(|row| row.iter())
            .fold(f64::INFINITY, |acc, &m| acc.min(m))
    }

    pub fn is_stable(&self) -> bool {
        self.min_margin() >= 0.0
    }

    pub fn service_min_margin(&self, service: usize) -> f64 {
        self.spectrum_margins
            .iter()
            .chain(self.compute_margins.iter())
            .map(|row| row[service])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn service_ok(&self, service: usize) -> bool {
        self.service_min_margin(service) >= 0.0
    }
}

/// Evaluate all queue-stability margins of `decision` against `profile`.
pub fn check_stability(profile: &LoadProfile, decision: &SlicingDecision) -> StabilityReport {
    let n_bs = profile.num_bs();
    let mut spectrum_margins = vec![[0.0; NUM_SERVICES]; n_bs];
    let mut compute_margins = vec![[0.0; NUM_SERVICES]; n_bs];
    for k in 0..NUM_SERVICES {
        let split = decision.split_column(k);
        for n in 0..n_bs {
            let mut transfer = 0.0;
            for (o, s) in split.iter().enumerate() {
                transfer += profile.transfer_rate(o, n, k) * s;
            }
            spectrum_margins[n][k] = decision.spectrum[n][k] as f64
                - profile.spectrum_demand[n][k]
                - profile.spectrum_task_time[n][k] * transfer;
            compute_margins[n][k] = decision.compute[n][k] as f64
                - profile.compute_demand[n][k]
                - profile.compute_task_time[k] * transfer;
        }
    }
    StabilityReport {
        spectrum_margins,
        compute_margins,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::SlicingDecision;
    use crate::topology::build_topology;
    use crate::TOLERANT;
    use approx::assert_relative_eq;

    pub(crate) fn table_services() -> Services {
        Services {
            specs: [
                ServiceSpec {
                    task_size_bits: 0.6e6,
                    compute_cycles_per_task: 6.0e8,
                    arrival_rate_per_vehicle: 1.0,
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

    fn table_radio() -> RadioConfig {
        RadioConfig {
            subcarrier_bandwidth_hz: 10.0e6,
            vm_cpu_hz: 10.0e9,
            handover_delay_s: 0.2,
            tx_power_w: 0.5,
            noise_dbm_per_hz: -174.0,
            rate_override_bps: None,
        }
    }

    fn uniform_window(topology: &Topology, rho: f64, v: f64) -> TrafficWindow {
        TrafficWindow {
            window_index: 0,
            densities: vec![rho; topology.num_zones],
            velocities: vec![v; topology.num_zones],
        }
    }

    #[test]
    fn path_loss_at_one_km_is_exactly_base() {
        assert_eq!(path_loss_db(1.0), 128.1);
    }

    #[test]
    fn rate_override_passes_through() {
        let topo = build_topology(1.0, 0.5, &[0.5], 0.8).unwrap();
        let mut radio = table_radio();
        radio.rate_override_bps = Some(vec![6.0e6]);
        assert_eq!(compute_rate(&radio, &topo, 0), 6.0e6);
    }

    #[test]
    fn shannon_rate_matches_per_center_recomputation() {
        let topo = build_topology(5.0, 0.2, &[0.5, 1.5, 2.5, 3.5, 4.5], 0.8).unwrap();
        let radio = table_radio();
        for bs in 0..5 {
            let centers = topo.covered_zone_centers(bs);
            let w = 10.0e6;
            let noise = 10f64.powf((-174.0 - 30.0) / 10.0) * w;
            let expect: f64 = centers
                .iter()
                .map(|c| {
                    let d = (c - topo.bs_positions_km[bs]).abs().max(0.035);
                    let pl = 10f64.powf((128.1 + 37.6 * d.log10()) / 10.0);
                    w * (1.0 + 0.5 / pl / noise).log2()
                })
                .sum::<f64>()
                / centers.len() as f64;
            assert_relative_eq!(compute_rate(&radio, &topo, bs), expect, max_relative = 1e-12);
            // Sanity: tens of Mbps per subcarrier for these parameters.
            assert!(compute_rate(&radio, &topo, bs) > 1.0e7);
        }
    }

    #[test]
    fn zero_density_gives_zero_loads() {
        let topo = build_topology(5.0, 0.2, &[0.5, 1.5, 2.5, 3.5, 4.5], 0.8).unwrap();
        let radio = table_radio();
        let rates = transmission_rates(&radio, &topo);
        let w = uniform_window(&topo, 0.0, 120.0);
        let p = build_load_profile(&topo, &w, &table_services(), &radio, &rates);
        assert!(p.base_arrivals.iter().flatten().all(|&x| x == 0.0));
        assert!(p.overlap_loads.iter().all(|l| l.rate == [0.0, 0.0]));
        assert_eq!(p.total_workload, [0.0, 0.0]);
    }

    #[test]
    fn single_zone_base_arrival_is_lambda_rho_l() {
        // One BS, one zone of 0.2 km at 50 veh/km, lambda = 1.
        let topo = build_topology(0.2, 0.2, &[0.1], 0.8).unwrap();
        let radio = table_radio();
        let rates = transmission_rates(&radio, &topo);
        let w = uniform_window(&topo, 50.0, 70.0);
        let p = build_load_profile(&topo, &w, &table_services(), &radio, &rates);
        assert_relative_eq!(p.base_arrivals[0][SENSITIVE], 10.0, max_relative = 1e-12);
    }

    #[test]
    fn overlapped_zone_splits_with_opposite_signs() {
        // Two BSs, one zone between them covered by both.
        let topo = build_topology(1.0, 1.0, &[0.25, 0.75], 0.6).unwrap();
        assert_eq!(topo.num_overlapped(), 1);
        let radio = table_radio();
        let rates = transmission_rates(&radio, &topo);
        let mut w = uniform_window(&topo, 50.0, 70.0);
        w.densities[0] = 10.0; // 10 veh/km * 1 km = 10 vehicles
        let p = build_load_profile(&topo, &w, &table_services(), &radio, &rates);
        // near BS is 0 (tie at 0.25 km each breaks low); far BS is 1.
        assert_eq!(p.transfer_rate(0, 0, SENSITIVE), 10.0);
        assert_eq!(p.transfer_rate(0, 1, SENSITIVE), -10.0);
        assert_eq!(p.base_arrivals[1][SENSITIVE], 10.0);
        assert_eq!(p.base_arrivals[0][SENSITIVE], 0.0);
        // Conservation at any split.
        for beta in [0.0, 0.3, 1.0] {
            let a0 = p.arrival_rate(0, SENSITIVE, &[beta]);
            let a1 = p.arrival_rate(1, SENSITIVE, &[beta]);
            assert_relative_eq!(a0 + a1, 10.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn offload_delay_is_inverse_margin() {
        let topo = build_topology(0.2, 0.2, &[0.1], 0.8).unwrap();
        let mut radio = table_radio();
        // Pick a rate so one subcarrier serves exactly 20 tasks/s.
        radio.rate_override_bps = Some(vec![20.0 * 0.6e6]);
        let rates = transmission_rates(&radio, &topo);
        let w = uniform_window(&topo, 50.0, 70.0); // 10 tasks/s arrivals
        let p = build_load_profile(&topo, &w, &table_services(), &radio, &rates);
        let d = offload_delay(&p, SENSITIVE, 0, 1, &[]).unwrap();
        assert_relative_eq!(d, 0.1, max_relative = 1e-12);
        // Zero margin is unstable.
        radio.rate_override_bps = Some(vec![10.0 * 0.6e6]);
        let rates = transmission_rates(&radio, &topo);
        let p = build_load_profile(&topo, &w, &table_services(), &radio, &rates);
        assert!(matches!(
            offload_delay(&p, SENSITIVE, 0, 1, &[]),
            Err(Error::UnstableQueue { .. })
        ));
    }

    #[test]
    fn process_delay_with_table_parameters() {
        // One VM at 10 GHz over 6e8 cycles/task serves 16.67 tasks/s; with
        // 20/3 tasks/s arriving the sojourn is 1/(50/3 - 20/3) = 0.1 s.
        let topo = build_topology(0.2, 0.2, &[0.1], 0.8).unwrap();
        let radio = table_radio();
        let rates = transmission_rates(&radio, &topo);
        let rho = (20.0 / 3.0) / 0.2; // arrivals = rho * L = 20/3
        let w = uniform_window(&topo, rho, 70.0);
        let p = build_load_profile(&topo, &w, &table_services(), &radio, &rates);
        let d = process_delay(&p, SENSITIVE, 0, 1, &[]).unwrap();
        assert_relative_eq!(d, 0.1, max_relative = 1e-10);
        // Empty queue: sojourn equals service time.
        let w0 = uniform_window(&topo, 0.0, 70.0);
        let p0 = build_load_profile(&topo, &w0, &table_services(), &radio, &rates);
        let d0 = process_delay(&p0, SENSITIVE, 0, 1, &[]).unwrap();
        assert_relative_eq!(d0, 6.0e8 / 10.0e9, max_relative = 1e-12);
        // mu <= lambda is unstable.
        let wbig = uniform_window(&topo, 100.0, 20.0);
        let pbig = build_load_profile(&topo, &wbig, &table_services(), &radio, &rates);
        assert!(process_delay(&pbig, SENSITIVE, 0, 1, &[]).is_err());
    }

    #[test]
    fn handover_matches_hand_arithmetic() {
        let topo = build_topology(5.0, 0.2, &[0.5, 1.5, 2.5, 3.5, 4.5], 0.8).unwrap();
        let w = uniform_window(&topo, 20.0, 100.0);
        // Sojourn: 25 zones * 0.2 km / 100 km/h = 0.05 h = 180 s.
        let d = handover_delay(&topo, &w, 1.0, 0.2).unwrap();
        assert_relative_eq!(d, 1.0 / 180.0, max_relative = 1e-12);
    }

    #[test]
    fn no_handovers_means_zero_delay() {
        assert_eq!(
            handover_delay_raw(0, 0.2, &[100.0], 1.0, 0.2).unwrap(),
            0.0
        );
    }

    #[test]
    fn jam_velocity_is_rejected() {
        let topo = build_topology(1.0, 0.5, &[0.5], 0.8).unwrap();
        let w = TrafficWindow {
            window_index: 0,
            densities: vec![120.0, 120.0],
            velocities: vec![0.0, 0.0],
        };
        assert!(matches!(
            handover_delay(&topo, &w, 1.0, 0.2),
            Err(Error::ZeroVelocity { .. })
        ));
    }

    #[test]
    fn single_bs_delay_collapses_to_sum_of_terms() {
        let topo = build_topology(1.0, 0.5, &[0.5], 0.8).unwrap();
        let radio = table_radio();
        let rates = transmission_rates(&radio, &topo);
        let w = uniform_window(&topo, 40.0, 80.0);
        let p = build_load_profile(&topo, &w, &table_services(), &radio, &rates);
        let decision = SlicingDecision::uniform(1, topo.num_overlapped(), 2, 4);
        let d = average_service_delay(&p, &decision, &topo, &w, &table_services(), &radio).unwrap();
        let dh = handover_delay(&topo, &w, 1.0, 0.2).unwrap();
        let d_o = offload_delay(&p, SENSITIVE, 0, 2, &[]).unwrap();
        let d_c = process_delay(&p, SENSITIVE, 0, 4, &[]).unwrap();
        assert_relative_eq!(d, dh + d_o + d_c, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_pair_has_equal_weights() {
        let topo = build_topology(2.0, 1.0, &[0.5, 1.5], 0.8).unwrap();
        assert_eq!(topo.num_overlapped(), 0);
        let radio = table_radio();
        let rates = transmission_rates(&radio, &topo);
        let w = uniform_window(&topo, 30.0, 90.0);
        let p = build_load_profile(&topo, &w, &table_services(), &radio, &rates);
        // Equal loads: Eq-style weights are each arrivals/total = 0.5.
        let a0 = p.arrival_rate(0, SENSITIVE, &[]);
        let a1 = p.arrival_rate(1, SENSITIVE, &[]);
        assert_relative_eq!(a0 / p.total_workload[SENSITIVE], 0.5, max_relative = 1e-12);
        assert_relative_eq!(a1 / p.total_workload[SENSITIVE], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn eq7_term_by_term_recomputation() {
        let topo = build_topology(5.0, 0.2, &[0.5, 1.5, 2.5, 3.5, 4.5], 0.8).unwrap();
        let radio = table_radio();
        let services = table_services();
        let rates = transmission_rates(&radio, &topo);
        let w = uniform_window(&topo, 40.0, 80.0);
        let p = build_load_profile(&topo, &w, &services, &radio, &rates);
        let decision = SlicingDecision::uniform(5, topo.num_overlapped(), 2, 8);
        let got = average_service_delay(&p, &decision, &topo, &w, &services, &radio).unwrap();

        // Independent evaluation straight from the published form.
        let split = vec![0.5; topo.num_overlapped()];
        let mut expect = handover_delay(&topo, &w, 1.0, 0.2).unwrap();
        let total: f64 = w.densities.iter().map(|rho| rho * 0.2).sum();
        for n in 0..5 {
            let mut arrivals = p.base_arrivals[n][SENSITIVE];
            for o in 0..p.num_overlapped() {
                arrivals += p.transfer_rate(o, n, SENSITIVE) * split[o];
            }
            let mu_s = 2.0 * rates[n] / 0.6e6;
            let mu_c = 8.0 * 10.0e9 / 6.0e8;
            expect += arrivals / total * (1.0 / (mu_s - arrivals) + 1.0 / (mu_c - arrivals));
        }
        assert_relative_eq!(got, expect, max_relative = 1e-10);
    }

    #[test]
    fn zero_load_returns_handover_only() {
        let topo = build_topology(5.0, 0.2, &[0.5, 1.5, 2.5, 3.5, 4.5], 0.8).unwrap();
        let radio = table_radio();
        let services = table_services();
        let rates = transmission_rates(&radio, &topo);
        let w = uniform_window(&topo, 0.0, 120.0);
        let p = build_load_profile(&topo, &w, &services, &radio, &rates);
        let decision = SlicingDecision::uniform(5, topo.num_overlapped(), 1, 1);
        let d = average_service_delay(&p, &decision, &topo, &w, &services, &radio).unwrap();
        assert_eq!(d, handover_delay(&topo, &w, 1.0, 0.2).unwrap());
    }

    #[test]
    fn stability_margin_families() {
        let topo = build_topology(1.0, 1.0, &[0.25, 0.75], 0.6).unwrap();
        let radio = table_radio();
        let services = table_services();
        let rates = transmission_rates(&radio, &topo);
        let w = uniform_window(&topo, 50.0, 70.0);
        let p = build_load_profile(&topo, &w, &services, &radio, &rates);
        let decision = SlicingDecision::uniform(2, 1, 3, 6);
        let report = check_stability(&p, &decision);
        // Margins match a direct recomputation.
        for n in 0..2 {
            let transfer = p.transfer_rate(0, n, SENSITIVE) * 0.5;
            let expect = 3.0
                - p.spectrum_demand[n][SENSITIVE]
                - p.spectrum_task_time[n][SENSITIVE] * transfer;
            assert_relative_eq!(
                report.spectrum_margins[n][SENSITIVE],
                expect,
                max_relative = 1e-12
            );
        }
        assert!(report.is_stable());
        // Zero load: margins equal the raw allocations.
        let w0 = uniform_window(&topo, 0.0, 120.0);
        let p0 = build_load_profile(&topo, &w0, &services, &radio, &rates);
        let r0 = check_stability(&p0, &decision);
        assert_eq!(r0.spectrum_margins[0][SENSITIVE], 3.0);
        assert_eq!(r0.compute_margins[0][TOLERANT], 6.0);
    }

    #[test]
    fn violated_margin_is_negative() {
        // Allocation below demand: margin -0.1 style case.
        let topo = build_topology(0.2, 0.2, &[0.1], 0.8).unwrap();
        let mut radio = table_radio();
        radio.rate_override_bps = Some(vec![0.6e6]); // 1 task/s per subcarrier
        let rates = transmission_rates(&radio, &topo);
        let w = uniform_window(&topo, (5.1_f64) / 0.2, 70.0); // 5.1 tasks/s
        let p = build_load_profile(&topo, &w, &table_services(), &radio, &rates);
        let decision = SlicingDecision::uniform(1, 0, 5, 18);
        let report = check_stability(&p, &decision);
        assert!(report.spectrum_margins[0][SENSITIVE] < 0.0);
        assert!(!report.is_stable());
        assert!(!report.service_ok(SENSITIVE));
    }

    #[test]
    fn monotonicity_in_allocations() {
        let topo = build_topology(5.0, 0.2, &[0.5, 1.5, 2.5, 3.5, 4.5], 0.8).unwrap();
        let radio = table_radio();
        let rates = transmission_rates(&radio, &topo);
        let w = uniform_window(&topo, 40.0, 80.0);
        let p = build_load_profile(&topo, &w, &table_services(), &radio, &rates);
        let split = vec![0.5; p.num_overlapped()];
        let mut last = f64::INFINITY;
        for s in 1..6 {
            let d = offload_delay(&p, SENSITIVE, 1, s, &split).unwrap();
            assert!(d < last);
            last = d;
        }
        let mut last = f64::INFINITY;
        for c in 4..10 {
            let d = process_delay(&p, SENSITIVE, 1, c, &split).unwrap();
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn conservation_under_any_split() {
        let topo = build_topology(5.0, 0.2, &[0.5, 1.5, 2.5, 3.5, 4.5], 0.8).unwrap();
        let radio = table_radio();
        let rates = transmission_rates(&radio, &topo);
        let w = uniform_window(&topo, 37.5, 80.0);
        let p = build_load_profile(&topo, &w, &table_services(), &radio, &rates);
        for trial in 0..20 {
            let split: Vec<f64> = (0..p.num_overlapped())
                .map(|o| ((trial * 7 + o * 13) % 11) as f64 / 10.0)
                .collect();
            for k in 0..NUM_SERVICES {
                let sum: f64 = (0..p.num_bs()).map(|n| p.arrival_rate(n, k, &split)).sum();
                assert_relative_eq!(sum, p.total_workload[k], max_relative = 1e-12);
            }
        }
    }
}
