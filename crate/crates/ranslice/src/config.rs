//! Experiment configuration: a TOML file whose defaults reproduce the
//! reference parameter tables (10 MHz subcarriers, 10 GHz VMs, 0.6/2 Mbit
//! tasks, 100 ms deadline, capacities of 18, the 5 km / 25 zone / 5 BS
//! deployment, and the learner constants).

use crate::cost::CostWeights;
use crate::env::EnvSetup;
use crate::error::{Error, Result};
use crate::learner::{Algorithm, LearnerConfig};
use crate::service::{RadioConfig, ServiceSpec, Services};
use crate::topology::{build_topology, Topology};
use crate::traffic::{
    generate_synthetic_trace, load_trace_csv, FlowModel, SyntheticProfile, TrafficWindow,
};
use crate::NUM_SERVICES;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TopologyConfig {
    pub road_length_km: f64,
    pub zone_length_km: f64,
    pub bs_positions_km: Vec<f64>,
    pub coverage_radius_km: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            road_length_km: 5.0,
            zone_length_km: 0.2,
            bs_positions_km: vec![0.5, 1.5, 2.5, 3.5, 4.5],
            coverage_radius_km: 0.8,
        }
    }
}

impl TopologyConfig {
    pub fn build(&self) -> Result<Topology> {
        build_topology(
            self.road_length_km,
            self.zone_length_km,
            &self.bs_positions_km,
            self.coverage_radius_km,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ServicesConfig {
    pub delay_sensitive: ServiceSpec,
    pub delay_tolerant: ServiceSpec,
}

impl Default for ServicesConfig {
    fn default() -> Self {
        ServicesConfig {
            delay_sensitive: ServiceSpec {
                task_size_bits: 0.6e6,
                compute_cycles_per_task: 6.0e8,
                arrival_rate_per_vehicle: 1.0,
                max_delay_s: Some(0.1),
            },
            delay_tolerant: ServiceSpec {
                task_size_bits: 2.0e6,
                compute_cycles_per_task: 2.0e8,
                arrival_rate_per_vehicle: 1.0,
                max_delay_s: None,
            },
        }
    }
}

impl ServicesConfig {
    pub fn to_services(&self) -> Services {
        Services {
            specs: [self.delay_sensitive, self.delay_tolerant],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CapacityConfig {
    pub spectrum_max: u32,
    pub compute_max: u32,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        CapacityConfig {
            spectrum_max: 18,
            compute_max: 18,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TraceConfig {
    pub source: TraceSource,
    /// Required when `source = "csv"`.
    pub csv_path: Option<String>,
    pub days: usize,
    pub profile: SyntheticProfile,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            source: TraceSource::Synthetic,
            csv_path: None,
            days: 21,
            profile: SyntheticProfile::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// raws | ddpg | td3 | raws-wo | random.
    pub algorithm: String,
    pub topology: TopologyConfig,
    pub flow: FlowModel,
    pub services: ServicesConfig,
    pub radio: RadioConfig,
    pub capacity: CapacityConfig,
    pub cost: CostWeights,
    pub learner: LearnerConfig,
    pub trace: TraceConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            algorithm: "raws".into(),
            topology: TopologyConfig::default(),
            flow: FlowModel {
                free_flow_speed_kmh: 120.0,
                max_density_veh_km: 120.0,
            },
            services: ServicesConfig::default(),
            radio: RadioConfig {
                subcarrier_bandwidth_hz: 10.0e6,
                vm_cpu_hz: 10.0e9,
                handover_delay_s: 0.2,
                tx_power_w: 0.5,
                noise_dbm_per_hz: -174.0,
                rate_override_bps: None,
            },
            capacity: CapacityConfig::default(),
            cost: CostWeights::default(),
            learner: LearnerConfig::default(),
            trace: TraceConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            field: "<toml>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        self.services.to_services().validate()?;
        self.radio.validate()?;
        self.cost.validate()?;
        self.learner.validate()?;
        Algorithm::parse(&self.algorithm)?;
        for (cap, field) in [
            (self.capacity.spectrum_max, "capacity.spectrum_max"),
            (self.capacity.compute_max, "capacity.compute_max"),
        ] {
            if (cap as usize) < NUM_SERVICES {
                return Err(Error::Config {
                    field: field.into(),
                    message: format!("must be at least {NUM_SERVICES} (one unit per service)"),
                });
            }
        }
        if self.trace.days == 0 {
            return Err(Error::Config {
                field: "trace.days".into(),
                message: "must be positive".into(),
            });
        }
        if self.trace.profile.windows_per_day == 0 {
            return Err(Error::Config {
                field: "trace.profile.windows_per_day".into(),
                message: "must be positive".into(),
            });
        }
        if self.trace.source == TraceSource::Csv && self.trace.csv_path.is_none() {
            return Err(Error::Config {
                field: "trace.csv_path".into(),
                message: "required when trace.source = \"csv\"".into(),
            });
        }
        // The rate override, when present, must match the BS count.
        if let Some(rates) = &self.radio.rate_override_bps {
            let n = self.topology.bs_positions_km.len();
            if rates.len() != 1 && rates.len() != n {
                return Err(Error::Config {
                    field: "radio.rate_override_bps".into(),
                    message: format!("needs 1 or {n} entries"),
                });
            }
        }
        Ok(())
    }

    pub fn algorithm(&self) -> Algorithm {
        Algorithm::parse(&self.algorithm).expect("validated")
    }

    pub fn services(&self) -> Services {
        self.services.to_services()
    }

    pub fn windows_per_day(&self) -> usize {
        self.trace.profile.windows_per_day
    }

    /// Build the trace this config describes (synthetic or CSV).
    pub fn build_trace(&self, topology: &Topology) -> Result<Vec<TrafficWindow>> {
        match self.trace.source {
            TraceSource::Synthetic => {
                let centers: Vec<f64> = (0..topology.num_zones)
                    .map(|m| topology.zone_center_km(m))
                    .collect();
                generate_synthetic_trace(
                    self.seed,
                    self.trace.days,
                    &self.trace.profile,
                    &self.flow,
                    &centers,
                )
            }
            TraceSource::Csv => {
                let path = self.trace.csv_path.as_ref().expect("validated");
                load_trace_csv(path, &self.flow, topology.num_zones)
            }
        }
    }

    /// First third of whole days trains, the rest evaluates. Returns the
    /// start-window pools for both phases.
    pub fn day_split(&self, trace_len: usize) -> (Vec<usize>, Vec<usize>) {
        let wpd = self.windows_per_day();
        let days = trace_len / wpd;
        if days <= 1 {
            let all = vec![0];
            return (all.clone(), all);
        }
        let train_days = (days / 3).max(1);
        let train = (0..train_days).map(|d| d * wpd).collect();
        let eval = (train_days..days).map(|d| d * wpd).collect();
        (train, eval)
    }

    pub fn env_setup(&self, topology: Topology, rates_bps: Vec<f64>) -> EnvSetup {
        EnvSetup {
            topology,
            services: self.services(),
            radio: self.radio.clone(),
            rates_bps,
            weights: self.cost,
            spectrum_capacity: self.capacity.spectrum_max,
            compute_capacity: self.capacity.compute_max,
            max_density: self.flow.max_density_veh_km,
            episode_len: self.windows_per_day(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{SENSITIVE, TOLERANT};

    #[test]
    fn defaults_reproduce_reference_tables() {
        let c = ExperimentConfig::default();
        assert_eq!(c.radio.subcarrier_bandwidth_hz, 10.0e6);
        assert_eq!(c.radio.vm_cpu_hz, 10.0e9);
        assert_eq!(c.radio.handover_delay_s, 0.2);
        assert_eq!(c.radio.tx_power_w, 0.5);
        assert_eq!(c.flow.free_flow_speed_kmh, 120.0);
        assert_eq!(c.flow.max_density_veh_km, 120.0);
        let services = c.services();
        assert_eq!(services.specs[SENSITIVE].task_size_bits, 0.6e6);
        assert_eq!(services.specs[SENSITIVE].compute_cycles_per_task, 6.0e8);
        assert_eq!(services.specs[SENSITIVE].max_delay_s, Some(0.1));
        assert_eq!(services.specs[TOLERANT].task_size_bits, 2.0e6);
        assert_eq!(services.specs[TOLERANT].compute_cycles_per_task, 2.0e8);
        assert_eq!(c.capacity.spectrum_max, 18);
        assert_eq!(c.capacity.compute_max, 18);
        assert_eq!(c.cost.operation_spectrum, 1.0);
        assert_eq!(c.cost.reconfiguration_spectrum, 5.0);
        assert_eq!(c.cost.violation, 200.0);
        assert_eq!(c.cost.revenue, 25.0);
        assert_eq!(c.cost.infeasibility, 200.0);
        assert_eq!(c.learner.actor_lr, 1e-4);
        assert_eq!(c.learner.critic_lr, 1e-3);
        assert_eq!(c.learner.discount, 0.75);
        assert_eq!(c.learner.tau, 0.005);
        assert_eq!(c.learner.sigma, 0.02);
        assert_eq!(c.learner.minibatch, 64);
        assert_eq!(c.learner.episodes, 1000);
        assert_eq!(c.learner.buffer_capacity, 100_000);
        assert_eq!(c.learner.hidden, vec![128, 64]);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::default();
        let text = c.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let c = ExperimentConfig::from_toml_str(
            "seed = 7\nalgorithm = \"td3\"\n[learner]\nactor_lr = 1e-4\ncritic_lr = 1e-3\ndiscount = 0.9\ntau = 0.01\nsigma = 0.05\nminibatch = 32\nepisodes = 10\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.algorithm(), Algorithm::Td3Shaped);
        assert_eq!(c.learner.discount, 0.9);
        assert_eq!(c.capacity.spectrum_max, 18);
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut c = ExperimentConfig::default();
        c.learner.discount = 1.5;
        assert!(matches!(c.validate(), Err(Error::Config { .. })));
        let mut c = ExperimentConfig::default();
        c.capacity.spectrum_max = 1;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.algorithm = "sarsa".into();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.trace.source = TraceSource::Csv;
        assert!(c.validate().is_err());
    }

    #[test]
    fn day_split_is_one_third_training() {
        let c = ExperimentConfig::default();
        let (train, eval) = c.day_split(21 * 24);
        assert_eq!(train.len(), 7);
        assert_eq!(eval.len(), 14);
        assert_eq!(train[0], 0);
        assert_eq!(eval[0], 7 * 24);
    }
}
