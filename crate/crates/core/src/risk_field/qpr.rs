use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cost::{footprint_cells, CostTable};
use super::drf::{DriverRiskField, DrfParams};
use super::grid::Grid;
use crate::vehicle::VehicleState;

/// Scaling of the grid sum. `GridSum` is the literal cell sum;
/// `AreaIntegral` multiplies by the cell area so values are stable under
/// grid refinement. Thresholds must be calibrated under the convention they
/// are applied with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QprConvention {
    GridSum,
    #[default]
    AreaIntegral,
}

/// Position of a neighbor relative to the ego: behind iff its center has a
/// negative longitudinal coordinate in the ego frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Front,
    Rear,
}

impl Relation {
    pub fn of(ego: &VehicleState, other: &VehicleState) -> Relation {
        if ego.to_local(other.x, other.y).0 < 0.0 {
            Relation::Rear
        } else {
            Relation::Front
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Front => "front",
            Relation::Rear => "rear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleShare {
    pub front: f64,
    pub rear: f64,
    pub relation: Relation,
}

impl VehicleShare {
    pub fn total(&self) -> f64 {
        self.front + self.rear
    }
}

/// One QPR component with its per-neighbor attribution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SideResult {
    pub value: f64,
    pub shares: BTreeMap<i64, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QprReport {
    pub total: f64,
    pub front: f64,
    pub rear: f64,
    pub per_vehicle: BTreeMap<i64, VehicleShare>,
    pub grid: Grid,
    pub convention: QprConvention,
}

/// Field parameters, cost table and summation convention bundled together.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskModel {
    pub drf: DrfParams,
    pub costs: CostTable,
    pub convention: QprConvention,
}

impl RiskModel {
    pub fn new(drf: DrfParams, costs: CostTable, convention: QprConvention) -> Self {
        RiskModel {
            drf,
            costs,
            convention,
        }
    }

    fn scale(&self, grid: &Grid) -> f64 {
        match self.convention {
            QprConvention::GridSum => 1.0,
            QprConvention::AreaIntegral => grid.cell_area(),
        }
    }

    /// Ego risk field weighted by the neighbors' cost map.
    ///
    /// Shares are computed per neighbor in isolation. When footprints
    /// overlap, the combined value uses the per-cell maximum cost and the
    /// shares are rescaled proportionally so they still sum to it.
    pub fn qpr_front(&self, ego: &VehicleState, neighbors: &[VehicleState], grid: &Grid) -> SideResult {
        let field = DriverRiskField::new(ego, &self.drf);
        let scale = self.scale(grid);
        let mut out = SideResult::default();
        // cell -> (max cost, drf value, covering count)
        let mut cells: BTreeMap<usize, (f64, f64, u32)> = BTreeMap::new();
        let mut overlap = false;

        for n in neighbors.iter().filter(|n| n.id != ego.id) {
            let cost = self.costs.cost(n.class);
            let mut drf_sum = 0.0;
            for cell in footprint_cells(n, grid) {
                let entry = cells.entry(cell).or_insert_with(|| {
                    let (x, y) = grid.center_of(cell);
                    (0.0, field.value_at(x, y), 0)
                });
                entry.0 = entry.0.max(cost);
                entry.2 += 1;
                overlap |= entry.2 > 1;
                drf_sum += entry.1;
            }
            let share = cost * (drf_sum * scale);
            out.value += share;
            *out.shares.entry(n.id).or_insert(0.0) += share;
        }

        if overlap {
            let combined = cells.values().map(|(c, d, _)| c * d).sum::<f64>() * scale;
            if out.value > 0.0 {
                let ratio = combined / out.value;
                for share in out.shares.values_mut() {
                    *share *= ratio;
                }
            }
            out.value = combined;
        }
        out
    }

    /// Risk fields of the vehicles behind the ego, weighted by the ego's own
    /// cost over the ego footprint.
    pub fn qpr_rear(&self, ego: &VehicleState, neighbors: &[VehicleState], grid: &Grid) -> SideResult {
        let ego_cost = self.costs.cost(ego.class);
        let scale = self.scale(grid);
        let ego_cells = footprint_cells(ego, grid);
        let mut out = SideResult::default();
        for n in neighbors.iter().filter(|n| n.id != ego.id) {
            if Relation::of(ego, n) != Relation::Rear {
                continue;
            }
            let field = DriverRiskField::new(n, &self.drf);
            let drf_sum: f64 = ego_cells
                .iter()
                .map(|&cell| {
                    let (x, y) = grid.center_of(cell);
                    field.value_at(x, y)
                })
                .sum();
            let share = ego_cost * (drf_sum * scale);
            out.value += share;
            *out.shares.entry(n.id).or_insert(0.0) += share;
        }
        out
    }

    /// Omnidirectional QPR with per-neighbor attribution.
    pub fn qpr_total(&self, ego: &VehicleState, neighbors: &[VehicleState], grid: &Grid) -> QprReport {
        let front = self.qpr_front(ego, neighbors, grid);
        let rear = self.qpr_rear(ego, neighbors, grid);
        let per_vehicle = neighbors
            .iter()
            .filter(|n| n.id != ego.id)
            .map(|n| {
                let share = VehicleShare {
                    front: front.shares.get(&n.id).copied().unwrap_or(0.0),
                    rear: rear.shares.get(&n.id).copied().unwrap_or(0.0),
                    relation: Relation::of(ego, n),
                };
                (n.id, share)
            })
            .collect();
        QprReport {
            total: front.value + rear.value,
            front: front.value,
            rear: rear.value,
            per_vehicle,
            grid: grid.clone(),
            convention: self.convention,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::VehicleClass;

    fn grid() -> Grid {
        Grid::new(-50.0, -30.0, 200, 120, 0.5)
    }

    fn ego() -> VehicleState {
        VehicleState::sedan(0, 0.0, 0.0, 0.0, 20.0)
    }

    #[test]
    fn empty_scene() {
        let r = RiskModel::default().qpr_total(&ego(), &[], &grid());
        assert_eq!(r.total, 0.0);
        assert!(r.per_vehicle.is_empty());
    }

    #[test]
    fn front_only_scene() {
        let lead = VehicleState::sedan(1, 15.0, 0.0, 0.0, 20.0);
        let r = RiskModel::default().qpr_total(&ego(), &[lead], &grid());
        assert!(r.front > 0.0);
        assert_eq!(r.rear, 0.0);
        assert_eq!(r.total, r.front);
        assert_eq!(r.per_vehicle[&1].relation, Relation::Front);
    }

    #[test]
    fn stationary_rear_vehicle_contributes_nothing() {
        let behind = VehicleState::sedan(1, -8.0, 0.0, 0.0, 0.0);
        let r = RiskModel::default().qpr_rear(&ego(), &[behind], &grid());
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn closing_rear_vehicle_contributes() {
        let behind = VehicleState::sedan(1, -8.0, 0.0, 0.0, 30.0);
        let model = RiskModel::default();
        let r = model.qpr_total(&ego(), &[behind], &grid());
        assert!(r.rear > 0.0);
        assert_eq!(r.front, 0.0);
        assert_eq!(r.per_vehicle[&1].relation, Relation::Rear);
    }

    #[test]
    fn cost_doubling_doubles_value() {
        let lead = VehicleState::sedan(1, 15.0, 0.5, 0.0, 20.0);
        let model = RiskModel::default();
        let doubled = RiskModel {
            costs: model.costs.scaled(2.0),
            ..model.clone()
        };
        let a = model.qpr_front(&ego(), &[lead.clone()], &grid()).value;
        let b = doubled.qpr_front(&ego(), &[lead], &grid()).value;
        assert!(a > 0.0);
        assert_eq!(b, 2.0 * a);
    }

    fn a_alone() -> VehicleState {
        VehicleState::sedan(1, 10.0, 0.0, 0.0, 0.0)
    }

    fn b_alone() -> VehicleState {
        VehicleState::sedan(2, 12.0, 0.0, 0.0, 0.0).with_class(VehicleClass::Truck)
    }

    #[test]
    fn overlapping_footprints_rescale_shares() {
        let (a, b) = (a_alone(), b_alone());
        let model = RiskModel::default();
        let r = model.qpr_total(&ego(), &[a, b], &grid());
        let sum: f64 = r.per_vehicle.values().map(|s| s.front).sum();
        assert!((sum - r.front).abs() <= 1e-9 * r.front);
        // the shared cells count once, at the truck's cost
        let alone: f64 = [1, 2]
            .iter()
            .map(|&id| {
                let v = if id == 1 { a_alone() } else { b_alone() };
                model.qpr_front(&ego(), &[v], &grid()).value
            })
            .sum();
        assert!(r.front < alone);
    }

    #[test]
    fn grid_sum_versus_area_integral() {
        let lead = VehicleState::sedan(1, 15.0, 0.0, 0.0, 20.0);
        let area = RiskModel::default().qpr_front(&ego(), &[lead.clone()], &grid()).value;
        let sum = RiskModel {
            convention: QprConvention::GridSum,
            ..RiskModel::default()
        }
        .qpr_front(&ego(), &[lead], &grid())
        .value;
        assert!((sum * 0.25 - area).abs() <= 1e-12 * area);
    }
}
