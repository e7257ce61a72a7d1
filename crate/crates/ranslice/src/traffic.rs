//! Per-window vehicle density and velocity, from CSV traces or a synthetic
//! diurnal generator.
//!
//! Velocities follow the fluid-flow mobility model: `v = v_f (1 - rho/rho_max)`.
//! Densities are window-level aggregates; within a slicing window traffic is
//! treated as stationary.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FlowModel {
    /// Free-flow speed in km/h.
    pub free_flow_speed_kmh: f64,
    /// Jam density in vehicles/km.
    pub max_density_veh_km: f64,
}

impl FlowModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.free_flow_speed_kmh > 0.0) {
            return Err(Error::Config {
                field: "flow.free_flow_speed_kmh".into(),
                message: "must be positive".into(),
            });
        }
        if !(self.max_density_veh_km > 0.0) {
            return Err(Error::Config {
                field: "flow.max_density_veh_km".into(),
                message: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// One slicing window of traffic state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficWindow {
    pub window_index: usize,
    /// Vehicles per km, one entry per zone.
    pub densities: Vec<f64>,
    /// km/h, one entry per zone.
    pub velocities: Vec<f64>,
}

/// `v = v_f (1 - rho/rho_max)`.
pub fn fluid_flow_velocity(model: &FlowModel, density: f64) -> Result<f64> {
    if density < 0.0 || density > model.max_density_veh_km {
        return Err(Error::OutOfRangeDensity {
            density,
            max_density: model.max_density_veh_km,
        });
    }
    Ok(model.free_flow_speed_kmh * (1.0 - density / model.max_density_veh_km))
}

fn window_from_densities(
    window_index: usize,
    densities: Vec<f64>,
    model: &FlowModel,
) -> Result<TrafficWindow> {
    let velocities = densities
        .iter()
        .map(|&rho| fluid_flow_velocity(model, rho))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrafficWindow {
        window_index,
        densities,
        velocities,
    })
}

/// Load a density trace from CSV.
///
/// Expected schema: header `window,zone_1,...,zone_M`, then one row per
/// slicing window with densities in vehicles/km. Velocities are filled from
/// the fluid-flow model.
pub fn load_trace_csv(
    path: impl AsRef<Path>,
    model: &FlowModel,
    expected_zones: usize,
) -> Result<Vec<TrafficWindow>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut windows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if i == 0 {
            let cols = line.split(',').count();
            if cols != expected_zones + 1 {
                return Err(Error::DimensionMismatch {
                    expected: expected_zones + 1,
                    actual: cols,
                    context: "trace header columns".into(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let window_index: usize = fields
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|e| Error::ParseError {
                line: i + 1,
                message: format!("bad window index: {e}"),
            })?;
        let densities: Vec<f64> = fields
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| Error::ParseError {
                    line: i + 1,
                    message: format!("bad density: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if densities.len() != expected_zones {
            return Err(Error::DimensionMismatch {
                expected: expected_zones,
                actual: densities.len(),
                context: format!("densities in row {}", i + 1),
            });
        }
        windows.push(window_from_densities(window_index, densities, model)?);
    }
    if windows.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(windows)
}

/// Write a trace in the same CSV schema `load_trace_csv` reads.
///
/// Floats are printed with the shortest round-trip representation, so a
/// write/load cycle reproduces densities bit for bit.
pub fn write_trace_csv(path: impl AsRef<Path>, windows: &[TrafficWindow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let zones = windows.first().map_or(0, |w| w.densities.len());
    write!(out, "window")?;
    for m in 0..zones {
        write!(out, ",zone_{}", m + 1)?;
    }
    writeln!(out)?;
    for w in windows {
        write!(out, "{}", w.window_index)?;
        for rho in &w.densities {
            write!(out, ",{rho}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Shape of the synthetic diurnal trace that stands in for real loop-detector
/// data: a base level, a sinusoid over the day, a spatial hot spot, and
/// Gaussian noise, clamped to `[0, rho_max]`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SyntheticProfile {
    pub base_density: f64,
    pub diurnal_amplitude: f64,
    /// Phase offset in radians for the daily sinusoid.
    pub diurnal_phase_rad: f64,
    /// Center of the Gaussian spatial hot spot, km from road start.
    pub hotspot_center_km: f64,
    /// Standard deviation of the hot spot, km.
    pub hotspot_width_km: f64,
    /// Peak extra density contributed by the hot spot, vehicles/km.
    pub hotspot_gain: f64,
    pub noise_std: f64,
    pub windows_per_day: usize,
}

impl Default for SyntheticProfile {
    fn default() -> Self {
        Self {
            base_density: 40.0,
            diurnal_amplitude: 25.0,
            diurnal_phase_rad: -std::f64::consts::FRAC_PI_2,
            hotspot_center_km: 1.0,
            hotspot_width_km: 0.6,
            hotspot_gain: 30.0,
            noise_std: 2.0,
            windows_per_day: 24,
        }
    }
}

/// Deterministic synthetic trace: `days * windows_per_day` windows.
pub fn generate_synthetic_trace(
    seed: u64,
    days: usize,
    profile: &SyntheticProfile,
    model: &FlowModel,
    topology_zone_centers_km: &[f64],
) -> Result<Vec<TrafficWindow>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, profile.noise_std.max(0.0)).expect("valid std");
    let per_day = profile.windows_per_day;
    let mut windows = Vec::with_capacity(days * per_day);
    for t in 0..days * per_day {
        let hour = (t % per_day) as f64;
        let diurnal = profile.diurnal_amplitude
            * (2.0 * std::f64::consts::PI * hour / per_day as f64 + profile.diurnal_phase_rad)
                .sin();
        let densities: Vec<f64> = topology_zone_centers_km
            .iter()
            .map(|&x| {
                let bump = if profile.hotspot_width_km > 0.0 {
                    let z = (x - profile.hotspot_center_km) / profile.hotspot_width_km;
                    profile.hotspot_gain * (-0.5 * z * z).exp()
                } else {
                    0.0
                };
                let eps = if profile.noise_std > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    // Keep the RNG stream aligned whether or not noise is on.
                    let _ = rng.random::<u64>();
                    0.0
                };
                (profile.base_density + diurnal + bump + eps).clamp(0.0, model.max_density_veh_km)
            })
            .collect();
        windows.push(window_from_densities(t, densities, model)?);
    }
    Ok(windows)
}
