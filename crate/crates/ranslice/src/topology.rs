//! Road segment geometry: equal-length zones, BS positions, and the
//! zone-to-BS association structure.
//!
//! A zone is *covered* by a BS when the zone's center point lies within the
//! coverage radius. Zones covered by a single BS are non-overlapped and bind
//! to that BS; zones covered by two or more BSs are overlapped and bind to
//! their two nearest BSs (their workload can later be split between the
//! pair). The center-point rule is a deliberate simplification for
//! macroscopic traffic; it keeps traces reproducible.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance for coverage/tie comparisons so exact-boundary geometries
/// (e.g. radius equal to a center distance) do not flip on rounding.
const GEOM_EPS: f64 = 1e-9;

/// Association of one zone with the BSs that serve it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZoneAssociation {
    /// Covered by a single BS; all workload goes there.
    Single { bs: usize },
    /// Covered by at least two BSs; workload is split between the nearest
    /// (`near`) and second nearest (`far`) of them.
    Pair { near: usize, far: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub road_length_km: f64,
    pub zone_length_km: f64,
    pub num_zones: usize,
    pub bs_positions_km: Vec<f64>,
    pub coverage_radius_km: f64,
    /// Per-zone association, index = zone id.
    pub associations: Vec<ZoneAssociation>,
    /// Zone ids covered by two or more BSs, ascending.
    pub overlapped_zone_ids: Vec<usize>,
    /// Zone ids covered by exactly one BS, ascending.
    pub non_overlapped_zone_ids: Vec<usize>,
}

impl Topology {
    pub fn num_bs(&self) -> usize {
        self.bs_positions_km.len()
    }

    pub fn num_overlapped(&self) -> usize {
        self.overlapped_zone_ids.len()
    }

    /// Center of zone `m` in km from the road start.
    pub fn zone_center_km(&self, zone: usize) -> f64 {
        (zone as f64 + 0.5) * self.zone_length_km
    }

    /// Binary association matrix entry c[m][n] (non-overlapped zones only).
    pub fn assoc_single(&self, zone: usize, bs: usize) -> bool {
        matches!(self.associations[zone], ZoneAssociation::Single { bs: b } if b == bs)
    }

    /// Binary association matrix entry a[m][n] (nearest BS of an overlapped zone).
    pub fn assoc_near(&self, zone: usize, bs: usize) -> bool {
        matches!(self.associations[zone], ZoneAssociation::Pair { near, .. } if near == bs)
    }

    /// Binary association matrix entry b[m][n] (second BS of an overlapped zone).
    pub fn assoc_far(&self, zone: usize, bs: usize) -> bool {
        matches!(self.associations[zone], ZoneAssociation::Pair { far, .. } if far == bs)
    }

    /// Zone centers covered by BS `n` (used for the average transmission rate).
    pub fn covered_zone_centers(&self, bs: usize) -> Vec<f64> {
        let pos = self.bs_positions_km[bs];
        (0..self.num_zones)
            .map(|m| self.zone_center_km(m))
            .filter(|c| (c - pos).abs() <= self.coverage_radius_km + GEOM_EPS)
            .collect()
    }
}

/// Build the topology from raw geometry.
///
/// `road_length` must be an integer multiple of `zone_length`; BS positions
/// must be sorted ascending. Ties in nearest-BS selection break toward the
/// lower BS index, which makes repeated builds bit-identical.
pub fn build_topology(
    road_length_km: f64,
    zone_length_km: f64,
    bs_positions_km: &[f64],
    coverage_radius_km: f64,
) -> Result<Topology> {
    if !(zone_length_km > 0.0) || !(road_length_km > 0.0) {
        return Err(Error::InvalidGeometry(
            "road and zone lengths must be positive".into(),
        ));
    }
    if !(coverage_radius_km > 0.0) {
        return Err(Error::InvalidGeometry("coverage radius must be positive".into()));
    }
    let ratio = road_length_km / zone_length_km;
    if (ratio - ratio.round()).abs() > GEOM_EPS {
        return Err(Error::InvalidGeometry(format!(
            "road length {road_length_km} km is not an integer multiple of zone length {zone_length_km} km"
        )));
    }
    let num_zones = ratio.round() as usize;
    if bs_positions_km.is_empty() {
        return Err(Error::InvalidGeometry("at least one BS is required".into()));
    }
    if bs_positions_km.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidGeometry("BS positions must be sorted ascending".into()));
    }

    let mut associations = Vec::with_capacity(num_zones);
    let mut overlapped = Vec::new();
    let mut non_overlapped = Vec::new();

    for m in 0..num_zones {
        let center = (m as f64 + 0.5) * zone_length_km;
        // BSs covering this zone, with center distances.
        let mut covering: Vec<(usize, f64)> = bs_positions_km
            .iter()
            .enumerate()
            .filter_map(|(n, &p)| {
                let d = (center - p).abs();
                (d <= coverage_radius_km + GEOM_EPS).then_some((n, d))
            })
            .collect();
        match covering.len() {
            0 => {
                return Err(Error::UncoveredZone {
                    zone: m,
                    center_km: center,
                })
            }
            1 => {
                non_overlapped.push(m);
                associations.push(ZoneAssociation::Single { bs: covering[0].0 });
            }
            _ => {
                // Two nearest by center distance; equidistant pairs resolve
                // to the lower BS index (stable sort keeps input order).
                covering.sort_by(|a, b| {
                    a.1.partial_cmp(&b.1)
                        .unwrap()
                        .then_with(|| a.0.cmp(&b.0))
                });
                // Treat near-equal distances as ties so the index rule applies.
                if (covering[0].1 - covering[1].1).abs() <= GEOM_EPS && covering[1].0 < covering[0].0
                {
                    covering.swap(0, 1);
                }
                overlapped.push(m);
                associations.push(ZoneAssociation::Pair {
                    near: covering[0].0,
                    far: covering[1].0,
                });
            }
        }
    }

    Ok(Topology {
        road_length_km,
        zone_length_km,
        num_zones,
        bs_positions_km: bs_positions_km.to_vec(),
        coverage_radius_km,
        associations,
        overlapped_zone_ids: overlapped,
        non_overlapped_zone_ids: non_overlapped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_layout() -> Topology {
        build_topology(5.0, 0.2, &[0.5, 1.5, 2.5, 3.5, 4.5], 0.8).unwrap()
    }

    #[test]
    fn five_km_layout_has_25_zones_and_5_bs() {
        let t = paper_layout();
        assert_eq!(t.num_zones, 25);
        assert_eq!(t.num_bs(), 5);
        assert_eq!(t.num_overlapped() + t.non_overlapped_zone_ids.len(), 25);
    }

    #[test]
    fn single_bs_road_is_all_non_overlapped() {
        let t = build_topology(1.0, 0.5, &[0.5], 0.8).unwrap();
        assert_eq!(t.num_zones, 2);
        assert!(t.overlapped_zone_ids.is_empty());
        for m in 0..2 {
            assert!(t.assoc_single(m, 0));
        }
    }

    #[test]
    fn zone_center_0_9_is_overlapped_between_first_two_bs() {
        let t = paper_layout();
        // Zone 4 has center 0.9 km: 0.4 km from BS 0, 0.6 km from BS 1.
        assert!((t.zone_center_km(4) - 0.9).abs() < 1e-12);
        assert!(t.overlapped_zone_ids.contains(&4));
        assert!(t.assoc_near(4, 0));
        assert!(t.assoc_far(4, 1));
    }

    #[test]
    fn coverage_classification_matches_enumeration() {
        // Independent enumeration of the 5 km layout: count covering disks
        // per zone center directly.
        let t = paper_layout();
        for m in 0..t.num_zones {
            let center = (m as f64 + 0.5) * 0.2;
            let n_cover = [0.5, 1.5, 2.5, 3.5, 4.5]
                .iter()
                .filter(|p| (center - **p).abs() <= 0.8 + 1e-9)
                .count();
            match t.associations[m] {
                ZoneAssociation::Single { .. } => assert_eq!(n_cover, 1, "zone {m}"),
                ZoneAssociation::Pair { .. } => assert!(n_cover >= 2, "zone {m}"),
            }
        }
    }

    #[test]
    fn uncovered_zone_is_rejected() {
        let err = build_topology(5.0, 0.2, &[0.5], 0.8).unwrap_err();
        assert!(matches!(err, Error::UncoveredZone { .. }));
    }

    #[test]
    fn non_integral_zone_count_is_rejected() {
        let err = build_topology(5.0, 0.3, &[2.5], 10.0).unwrap_err();
        assert!(matches!(err, Error::InvalidGeometry(_)));
    }

    #[test]
    fn equidistant_tie_breaks_to_lower_bs_index() {
        // Zone center at 1.0 km, BSs at 0.5 and 1.5: both 0.5 km away.
        let t = build_topology(2.0, 2.0, &[0.5, 1.5], 0.6).unwrap();
        assert!(t.assoc_near(0, 0));
        assert!(t.assoc_far(0, 1));
    }

    #[test]
    fn rebuilds_are_identical() {
        let a = paper_layout();
        let b = paper_layout();
        assert_eq!(a.associations, b.associations);
        assert_eq!(a.overlapped_zone_ids, b.overlapped_zone_ids);
    }

    proptest! {
        #[test]
        fn overlapped_and_non_overlapped_partition_all_zones(
            num_zones in 1usize..40,
            bs_count in 1usize..8,
            radius in 0.3f64..3.0,
        ) {
            let zone_len = 0.25;
            let road = zone_len * num_zones as f64;
            // Spread BSs evenly so most geometries are fully covered.
            let positions: Vec<f64> = (0..bs_count)
                .map(|i| road * (i as f64 + 0.5) / bs_count as f64)
                .collect();
            if let Ok(t) = build_topology(road, zone_len, &positions, radius) {
                prop_assert_eq!(
                    t.overlapped_zone_ids.len() + t.non_overlapped_zone_ids.len(),
                    t.num_zones
                );
                let mut all: Vec<usize> = t
                    .overlapped_zone_ids
                    .iter()
                    .chain(t.non_overlapped_zone_ids.iter())
                    .copied()
                    .collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..t.num_zones).collect::<Vec<_>>());
            }
        }
    }
}
