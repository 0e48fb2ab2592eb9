use serde::{Deserialize, Serialize};

use super::geometry::{path_coordinates, predicted_arc, ArcGeometry, Side};
use super::grid::{Grid, ScalarField};
use crate::vehicle::VehicleState;

/// Shape parameters of the driver risk field.
///
/// The shipped defaults are implementer-chosen; they are not calibrated
/// against driving data. `t_la` and `m` are wider than the classic
/// straight-driving values so the field still reaches a vehicle four
/// seconds of headway ahead or one lane to the side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrfParams {
    /// Parabola steepness of the height profile, 1/m².
    pub p: f64,
    /// Look-ahead time, seconds.
    pub t_la: f64,
    /// Width growth per meter of arc length when driving straight.
    pub m: f64,
    /// Width growth per radian of steering on the inside of the turn, 1/rad.
    pub k_inner: f64,
    /// Width growth per radian of steering on the outside of the turn, 1/rad.
    pub k_outer: f64,
    /// Half-width at the vehicle, meters. `None` means `vehicle width / 4`.
    pub c: Option<f64>,
    /// Steering magnitude below which the straight-ray geometry is used.
    pub delta_straight: f64,
    /// Optional cap on the field length; the look-ahead distance always
    /// bounds it.
    pub s_max: Option<f64>,
    /// Cells farther than this many widths from the path are zero.
    pub lateral_cutoff: f64,
}

impl Default for DrfParams {
    fn default() -> Self {
        DrfParams {
            p: 0.0064,
            t_la: 5.0,
            m: 0.05,
            k_inner: 0.2,
            k_outer: 1.14,
            c: None,
            delta_straight: 1e-3,
            s_max: None,
            lateral_cutoff: 4.0,
        }
    }
}

impl DrfParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("drf.{name} must be positive, got {v}"))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(format!("drf.{name} must be non-negative, got {v}"))
            }
        };
        positive("p", self.p)?;
        positive("t_la", self.t_la)?;
        positive("delta_straight", self.delta_straight)?;
        positive("lateral_cutoff", self.lateral_cutoff)?;
        non_negative("m", self.m)?;
        non_negative("k_inner", self.k_inner)?;
        non_negative("k_outer", self.k_outer)?;
        if let Some(c) = self.c {
            positive("c", c)?;
        }
        if let Some(s) = self.s_max {
            non_negative("s_max", s)?;
        }
        Ok(())
    }

    /// Base half-width `c` for a vehicle of the given width.
    pub fn base_width(&self, vehicle_width: f64) -> f64 {
        self.c.unwrap_or(vehicle_width / 4.0)
    }
}

/// Height of the field at arc length `s`: `p (s - v t_la)²` up to the
/// look-ahead distance, zero beyond it (and behind the vehicle).
pub fn drf_height(s: f64, speed: f64, params: &DrfParams) -> f64 {
    let look_ahead = speed * params.t_la;
    if s < 0.0 || s > look_ahead {
        return 0.0;
    }
    let d = s - look_ahead;
    params.p * d * d
}

/// Gaussian width on one side of the path: `(m + k_side |steering|) s + c`.
pub fn drf_width(s: f64, steering: f64, side: Side, params: &DrfParams, base_width: f64) -> f64 {
    let k = match side {
        Side::Inner => params.k_inner,
        Side::Outer => params.k_outer,
    };
    (params.m + k * steering.abs()) * s + base_width
}

/// The risk field of one vehicle, ready for pointwise evaluation.
#[derive(Debug, Clone)]
pub struct DriverRiskField<'a> {
    state: &'a VehicleState,
    params: &'a DrfParams,
    arc: ArcGeometry,
    base_width: f64,
    s_max: f64,
}

impl<'a> DriverRiskField<'a> {
    pub fn new(state: &'a VehicleState, params: &'a DrfParams) -> Self {
        let look_ahead = state.speed * params.t_la;
        let s_max = params.s_max.map_or(look_ahead, |cap| cap.min(look_ahead));
        DriverRiskField {
            state,
            params,
            arc: predicted_arc(state, params),
            base_width: params.base_width(state.width),
            s_max,
        }
    }

    pub fn arc(&self) -> &ArcGeometry {
        &self.arc
    }

    /// Field length along the path, meters.
    pub fn support_length(&self) -> f64 {
        self.s_max
    }

    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        if self.s_max <= 0.0 {
            return 0.0;
        }
        let pc = path_coordinates((x, y), self.state, &self.arc);
        if pc.s < 0.0 || pc.s > self.s_max {
            return 0.0;
        }
        let sigma = drf_width(pc.s, self.state.steering, pc.side, self.params, self.base_width);
        if pc.lateral_offset > self.params.lateral_cutoff * sigma {
            return 0.0;
        }
        let height = drf_height(pc.s, self.state.speed, self.params);
        height * (-(pc.lateral_offset * pc.lateral_offset) / (2.0 * sigma * sigma)).exp()
    }
}

/// Samples a vehicle's risk field at every cell center of `grid`.
pub fn drf_evaluate(state: &VehicleState, params: &DrfParams, grid: &Grid) -> ScalarField {
    let field = DriverRiskField::new(state, params);
    let mut out = ScalarField::zeros(grid.clone());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = grid.cell_center(i, j);
            out.values[grid.index(i, j)] = field.value_at(x, y);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn height_profile() {
        let p = DrfParams::default();
        assert_eq!(drf_height(50.0, 10.0, &p), 0.0);
        let p35 = DrfParams {
            t_la: 3.5,
            ..DrfParams::default()
        };
        assert!((drf_height(0.0, 10.0, &p35) - 7.84).abs() < 1e-12);
        assert_eq!(drf_height(35.0, 10.0, &p35), 0.0);
        assert_eq!(drf_height(50.5, 10.0, &p), 0.0);
        assert_eq!(drf_height(-1.0, 10.0, &p), 0.0);
    }

    #[test]
    fn width_profile() {
        let p = DrfParams {
            m: 0.05,
            k_inner: 0.2,
            ..DrfParams::default()
        };
        assert!((drf_width(10.0, 0.1, Side::Inner, &p, 0.5) - 1.2).abs() < 1e-12);
        assert_eq!(drf_width(0.0, 0.3, Side::Outer, &p, 0.45), 0.45);
        let sym = DrfParams {
            k_inner: 0.7,
            k_outer: 0.7,
            ..p
        };
        for s in [0.0, 1.0, 17.5, 80.0] {
            assert_eq!(
                drf_width(s, -0.2, Side::Inner, &sym, 0.5),
                drf_width(s, -0.2, Side::Outer, &sym, 0.5)
            );
        }
    }

    #[test]
    fn base_width_is_quarter_car_width() {
        let p = DrfParams::default();
        assert_eq!(p.base_width(1.8), 0.45);
        let v = VehicleState::sedan(1, 0.0, 0.0, 0.0, 10.0);
        assert_eq!(drf_width(0.0, 0.4, Side::Inner, &p, p.base_width(v.width)), 0.45);
    }

    #[test]
    fn standstill_field_is_empty() {
        let v = VehicleState::sedan(1, 0.0, 0.0, 0.0, 0.0);
        let grid = Grid::new(-10.0, -10.0, 40, 40, 0.5);
        let f = drf_evaluate(&v, &DrfParams::default(), &grid);
        assert!(f.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn on_path_value_equals_height() {
        let v = VehicleState::sedan(1, 0.0, 0.0, 0.0, 10.0);
        let p = DrfParams::default();
        let field = DriverRiskField::new(&v, &p);
        for s in [0.25, 5.0, 20.0, 49.9] {
            assert_eq!(field.value_at(s, 0.0), drf_height(s, 10.0, &p));
        }
        assert_eq!(field.value_at(50.1, 0.0), 0.0);
        assert_eq!(field.value_at(-1.0, 0.0), 0.0);
    }

    #[test]
    fn lateral_cutoff_truncates() {
        let v = VehicleState::sedan(1, 0.0, 0.0, 0.0, 10.0);
        let p = DrfParams::default();
        let field = DriverRiskField::new(&v, &p);
        let sigma = drf_width(10.0, 0.0, Side::Inner, &p, 0.45);
        assert!(field.value_at(10.0, 3.9 * sigma) > 0.0);
        assert_eq!(field.value_at(10.0, 4.1 * sigma), 0.0);
    }

    #[test]
    fn s_max_caps_the_support() {
        let v = VehicleState::sedan(1, 0.0, 0.0, 0.0, 10.0);
        let p = DrfParams {
            s_max: Some(10.0),
            ..DrfParams::default()
        };
        let field = DriverRiskField::new(&v, &p);
        assert!(field.value_at(9.9, 0.0) > 0.0);
        assert_eq!(field.value_at(10.1, 0.0), 0.0);
    }

    #[test]
    fn straight_mirror_symmetry() {
        let v = VehicleState::sedan(1, 0.0, 0.0, 0.0, 15.0);
        let p = DrfParams {
            k_inner: 0.5,
            k_outer: 0.5,
            ..DrfParams::default()
        };
        let grid = Grid::new(-5.0, -10.0, 140, 40, 0.5);
        let f = drf_evaluate(&v, &p, &grid);
        for j in 0..grid.ny / 2 {
            for i in 0..grid.nx {
                let a = f.get(i, j);
                let b = f.get(i, grid.ny - 1 - j);
                assert!((a - b).abs() <= 1e-12, "({i},{j}) {a} vs {b}");
            }
        }
    }
}
