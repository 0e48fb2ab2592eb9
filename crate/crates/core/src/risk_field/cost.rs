use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::{Grid, ScalarField};
use crate::vehicle::{VehicleClass, VehicleState};

/// Collision cost per road-user class (dimensionless).
///
/// Defaults are implementer-chosen: heavier and more vulnerable road users
/// cost more.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostTable {
    pub costs: BTreeMap<VehicleClass, f64>,
    pub default_cost: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        let costs = [
            (VehicleClass::Sedan, 1.0),
            (VehicleClass::Truck, 2.0),
            (VehicleClass::Bus, 2.0),
            (VehicleClass::Motorcycle, 0.8),
            (VehicleClass::Vru, 3.0),
        ]
        .into_iter()
        .collect();
        CostTable {
            costs,
            default_cost: 1.0,
        }
    }
}

impl CostTable {
    pub fn cost(&self, class: VehicleClass) -> f64 {
        self.costs.get(&class).copied().unwrap_or(self.default_cost)
    }

    pub fn scaled(&self, factor: f64) -> CostTable {
        CostTable {
            costs: self.costs.iter().map(|(k, v)| (*k, v * factor)).collect(),
            default_cost: self.default_cost * factor,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (class, &cost) in self.costs.iter() {
            if !(cost.is_finite() && cost >= 0.0) {
                return Err(format!("cost of {class} must be non-negative, got {cost}"));
            }
        }
        if !(self.default_cost.is_finite() && self.default_cost >= 0.0) {
            return Err(format!("default_cost must be non-negative, got {}", self.default_cost));
        }
        Ok(())
    }
}

/// Indices of the grid cells whose centers fall inside the vehicle's
/// oriented `length x width` rectangle (boundary inclusive).
pub fn footprint_cells(vehicle: &VehicleState, grid: &Grid) -> Vec<usize> {
    let (c, s) = vehicle.direction();
    let hl = 0.5 * vehicle.length;
    let hw = 0.5 * vehicle.width;
    let mut umin = f64::INFINITY;
    let mut umax = f64::NEG_INFINITY;
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for (a, b) in [(hl, hw), (hl, -hw), (-hl, hw), (-hl, -hw)] {
        let (u, v) = grid.world_to_grid(vehicle.x + a * c - b * s, vehicle.y + a * s + b * c);
        umin = umin.min(u);
        umax = umax.max(u);
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    let h = grid.resolution;
    let Some((i_lo, i_hi)) = index_range(umin / h - 0.5, umax / h - 0.5, grid.nx) else {
        return Vec::new();
    };
    let Some((j_lo, j_hi)) = index_range(vmin / h - 0.5, vmax / h - 0.5, grid.ny) else {
        return Vec::new();
    };
    let mut cells = Vec::new();
    for j in j_lo..=j_hi {
        for i in i_lo..=i_hi {
            let (x, y) = grid.cell_center(i, j);
            let (lon, lat) = vehicle.to_local(x, y);
            if lon.abs() <= hl && lat.abs() <= hw {
                cells.push(grid.index(i, j));
            }
        }
    }
    cells
}

fn index_range(lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
    let lo = lo.floor();
    let hi = hi.ceil();
    if hi < 0.0 || lo > (n - 1) as f64 {
        return None;
    }
    Some((lo.max(0.0) as usize, (hi as usize).min(n - 1)))
}

/// Rasterizes every vehicle (except `exclude`) with its class cost.
/// Overlapping footprints keep the larger cost per cell.
pub fn cost_map(
    vehicles: &[VehicleState],
    costs: &CostTable,
    grid: &Grid,
    exclude: Option<i64>,
) -> ScalarField {
    let mut field = ScalarField::zeros(grid.clone());
    for v in vehicles.iter().filter(|v| Some(v.id) != exclude) {
        let cost = costs.cost(v.class);
        for cell in footprint_cells(v, grid) {
            let slot = &mut field.values[cell];
            *slot = slot.max(cost);
        }
    }
    field
}
