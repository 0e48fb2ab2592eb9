//! Dynamic driver risk field (DRF), object cost maps and omnidirectional
//! quantified perceived risk (QPR).
//!
//! The DRF of a vehicle is a torus-like ridge laid along its predicted
//! constant-steering path: its height decays parabolically to zero at the
//! look-ahead distance `speed * t_la` and its Gaussian cross-section widens
//! linearly with arc length. QPR is the grid sum of `cost * DRF`; the
//! omnidirectional total adds the ego DRF over the costs of everyone else
//! (front) to the DRFs of following vehicles over the ego's own cost (rear).

mod cost;
mod drf;
mod geometry;
mod grid;
mod qpr;

pub use cost::{cost_map, footprint_cells, CostTable};
pub use drf::{drf_evaluate, drf_height, drf_width, DriverRiskField, DrfParams};
pub use geometry::{path_coordinates, predicted_arc, ArcGeometry, PathCoordinates, Side};
pub use grid::{Grid, GridSpec, PgmBounds, ScalarField};
pub use qpr::{QprConvention, QprReport, Relation, RiskModel, SideResult, VehicleShare};
