use serde::{Deserialize, Serialize};

use super::drf::DrfParams;
use crate::vehicle::{wrap_angle, VehicleState};

/// Predicted constant-steering path of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ArcGeometry {
    /// Steering below `delta_straight`: the path is the heading ray.
    Straight,
    Arc {
        radius: f64,
        center_x: f64,
        center_y: f64,
        /// +1 for a left (counter-clockwise) turn, -1 for a right turn.
        turn_sign: i8,
    },
}

/// Which side of the path a point lies on. For arcs, `Inner` is the inside
/// of the turn; on a straight path the left side counts as inner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Inner,
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCoordinates {
    /// Signed distance along the path; negative behind the vehicle.
    pub s: f64,
    pub lateral_offset: f64,
    pub side: Side,
}

/// Turning circle of the kinematic car model, `R = L / tan(|steering|)`.
pub fn predicted_arc(state: &VehicleState, params: &DrfParams) -> ArcGeometry {
    let delta = state.steering;
    if delta.abs() < params.delta_straight {
        return ArcGeometry::Straight;
    }
    let radius = state.wheelbase / delta.abs().tan();
    let turn_sign: i8 = if delta > 0.0 { 1 } else { -1 };
    let (c, s) = state.direction();
    // left normal is (-sin, cos)
    let k = radius * f64::from(turn_sign);
    ArcGeometry::Arc {
        radius,
        center_x: state.x - k * s,
        center_y: state.y + k * c,
        turn_sign,
    }
}

/// Arc length, lateral offset and side of a world point relative to the
/// predicted path. On an arc the swept angle is taken in (-pi, pi], so the
/// path covers at most half a circle ahead of the vehicle.
pub fn path_coordinates(
    point: (f64, f64),
    state: &VehicleState,
    arc: &ArcGeometry,
) -> PathCoordinates {
    let (px, py) = point;
    match *arc {
        ArcGeometry::Straight => {
            let (lon, lat) = state.to_local(px, py);
            PathCoordinates {
                s: lon,
                lateral_offset: lat.abs(),
                side: if lat >= 0.0 { Side::Inner } else { Side::Outer },
            }
        }
        ArcGeometry::Arc {
            radius,
            center_x,
            center_y,
            turn_sign,
        } => {
            let vehicle_angle = (state.y - center_y).atan2(state.x - center_x);
            let rx = px - center_x;
            let ry = py - center_y;
            let dist = rx.hypot(ry);
            let swept = wrap_angle(ry.atan2(rx) - vehicle_angle);
            PathCoordinates {
                s: radius * f64::from(turn_sign) * swept,
                lateral_offset: (dist - radius).abs(),
                side: if dist < radius { Side::Inner } else { Side::Outer },
            }
        }
    }
}
