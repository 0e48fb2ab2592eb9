use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::idm::{idm_accel, IdmParams};
use super::EvalError;
use crate::risk_field::{path_coordinates, predicted_arc, ArcGeometry, DrfParams};
use crate::scene::{Action, Scene};
use crate::vehicle::VehicleState;

/// Rollout settings and safety thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Rollout length, s.
    pub horizon: f64,
    /// Step, s.
    pub dt: f64,
    pub ttc_threshold: f64,
    pub decel_threshold: f64,
    /// Magnitude of the accelerate primitive, m/s².
    pub accel: f64,
    /// Magnitude of the decelerate primitive, m/s².
    pub decel: f64,
    pub lane_change_duration: f64,
    pub lane_width: f64,
    /// Turn radius used when the ego is not already steering that way.
    pub turn_radius: f64,
    /// Extra lateral clearance of the collision corridor, m.
    pub corridor_margin: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            horizon: 4.0,
            dt: 0.1,
            ttc_threshold: 2.0,
            decel_threshold: 3.0,
            accel: 2.0,
            decel: 2.0,
            lane_change_duration: 3.0,
            lane_width: 3.5,
            turn_radius: 15.0,
            corridor_margin: 0.3,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let positive = [
            self.horizon,
            self.dt,
            self.accel,
            self.decel,
            self.lane_change_duration,
            self.lane_width,
            self.turn_radius,
        ];
        let nonneg = [self.ttc_threshold, self.decel_threshold, self.corridor_margin];
        if positive.iter().all(|v| v.is_finite() && *v > 0.0) && nonneg.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(EvalError::BadParameter("oracle settings must be positive".into()))
        }
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyVerdict {
    pub safe: bool,
    /// Seconds; infinite (serialized as null) when nothing closes in.
    #[serde(with = "infinite_as_null")]
    pub min_ttc: f64,
    /// Largest braking (m/s², non-negative) demanded of another vehicle.
    pub induced_decel: f64,
    pub cause: String,
}

struct Mover {
    state: VehicleState,
    /// Desired speed of a vehicle re-controlled by IDM.
    desired_speed: f64,
}

/// Ego pose at time `t` under an action primitive, with the steering that
/// describes its current path.
fn ego_at(start: &VehicleState, action: Action, t: f64, cfg: &OracleConfig) -> VehicleState {
    let mut s = start.clone();
    s.steering = 0.0;
    let (c, sn) = start.direction();
    let v0 = start.speed;
    let straight = |s: &mut VehicleState, dist: f64| {
        s.x = start.x + c * dist;
        s.y = start.y + sn * dist;
    };
    match action {
        Action::Idle => straight(&mut s, v0 * t),
        Action::Accelerate => {
            s.speed = v0 + cfg.accel * t;
            straight(&mut s, v0 * t + 0.5 * cfg.accel * t * t);
        }
        Action::Decelerate => {
            let stop = v0 / cfg.decel;
            let (v, d) = if t >= stop {
                (0.0, 0.5 * v0 * stop)
            } else {
                (v0 - cfg.decel * t, v0 * t - 0.5 * cfg.decel * t * t)
            };
            s.speed = v;
            straight(&mut s, d);
        }
        Action::LaneChangeLeft | Action::LaneChangeRight => {
            let side = if action == Action::LaneChangeLeft { 1.0 } else { -1.0 };
            let w = cfg.lane_width;
            let d = cfg.lane_change_duration;
            let (off, rate) = if t < d {
                (0.5 * w * (1.0 - (PI * t / d).cos()), 0.5 * w * PI / d * (PI * t / d).sin())
            } else {
                (w, 0.0)
            };
            let lon = v0 * t;
            s.x = start.x + c * lon - sn * side * off;
            s.y = start.y + sn * lon + c * side * off;
            s.heading = start.heading + (side * rate).atan2(v0.max(1e-6));
            s.speed = v0.hypot(rate);
        }
        Action::TurnLeft | Action::TurnRight => {
            let sign = if action == Action::TurnLeft { 1.0 } else { -1.0 };
            let radius = if start.steering * sign > 1e-3 {
                start.wheelbase / start.steering.abs().tan()
            } else {
                cfg.turn_radius
            };
            let omega = sign * v0 / radius;
            let phi = omega * t;
            // center sits on the turning side of the start pose
            let (cx, cy) = (start.x - sign * radius * sn, start.y + sign * radius * c);
            let h = start.heading + phi;
            s.x = cx + sign * radius * h.sin();
            s.y = cy - sign * radius * h.cos();
            s.heading = h;
            s.steering = sign * (start.wheelbase / radius).atan();
        }
    }
    s
}

/// Rolls the scene forward under `action` and judges it by time to
/// collision along the ego path and by the braking forced on vehicles that
/// end up behind the ego in its lane.
pub fn safety_oracle(scene: &Scene, action: Action, cfg: &OracleConfig, idm: &IdmParams) -> SafetyVerdict {
    let steps = (cfg.horizon / cfg.dt).round().max(0.0) as usize;
    let drf = DrfParams::default();
    let mut others: Vec<Mover> = scene
        .neighbors
        .iter()
        .map(|n| Mover {
            desired_speed: idm.desired_speed.max(n.state.speed),
            state: n.state.clone(),
        })
        .collect();
    let mut min_ttc = f64::INFINITY;
    let mut ttc_vehicle = None;
    let mut induced: f64 = 0.0;
    let mut induced_vehicle = None;

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let ego = ego_at(&scene.ego, action, t, cfg);
        let arc = predicted_arc(&ego, &drf);
        let (ec, es) = ego.direction();
        let mut accels = vec![None; others.len()];
        for (idx, m) in others.iter().enumerate() {
            let o = &m.state;
            let pc = path_coordinates((o.x, o.y), &ego, &arc);
            let (tx, ty) = match arc {
                ArcGeometry::Straight => (ec, es),
                ArcGeometry::Arc {
                    center_x,
                    center_y,
                    turn_sign,
                    ..
                } => {
                    let (rx, ry) = (o.x - center_x, o.y - center_y);
                    let r = rx.hypot(ry).max(1e-9);
                    let sign = f64::from(turn_sign);
                    (-sign * ry / r, sign * rx / r)
                }
            };
            // other's box projected on the path tangent and normal
            let (oc, os) = o.direction();
            let cos_rel = (oc * tx + os * ty).abs();
            let sin_rel = (oc * ty - os * tx).abs();
            let half_lon = 0.5 * (o.length * cos_rel + o.width * sin_rel);
            let half_lat = 0.5 * (o.length * sin_rel + o.width * cos_rel);
            let (vx, vy) = o.velocity();
            let along = vx * tx + vy * ty;

            if pc.lateral_offset < 0.5 * ego.width + half_lat + cfg.corridor_margin {
                let gap = pc.s.abs() - 0.5 * ego.length - half_lon;
                let closing = if pc.s >= 0.0 { ego.speed - along } else { along - ego.speed };
                let ttc = if gap <= 0.0 {
                    0.0
                } else if closing > 0.0 {
                    gap / closing
                } else {
                    f64::INFINITY
                };
                if ttc < min_ttc {
                    min_ttc = ttc;
                    ttc_vehicle = Some(o.id);
                }
            }

            if pc.s < 0.0 && pc.lateral_offset < 0.5 * cfg.lane_width && k < steps {
                let gap = -pc.s - 0.5 * (ego.length + o.length);
                let params = IdmParams {
                    desired_speed: m.desired_speed,
                    ..*idm
                };
                let a = if gap > 0.0 {
                    idm_accel(o.speed, gap, o.speed - ego.speed, &params).unwrap_or(-idm.emergency_decel)
                } else {
                    -idm.emergency_decel
                };
                accels[idx] = Some(a);
                if -a > induced {
                    induced = -a;
                    induced_vehicle = Some(o.id);
                }
            }
        }
        if k == steps {
            break;
        }
        for (m, a) in others.iter_mut().zip(accels) {
            let o = &mut m.state;
            let v_old = o.speed;
            if let Some(a) = a {
                o.speed = (o.speed + a * cfg.dt).max(0.0);
            }
            let dist = 0.5 * (v_old + o.speed) * cfg.dt;
            let (c, s) = o.direction();
            o.x += c * dist;
            o.y += s * dist;
        }
    }

    let mut causes = Vec::new();
    if min_ttc < cfg.ttc_threshold {
        causes.push(format!(
            "time to collision {:.2} s with vehicle {} is below {} s",
            min_ttc,
            ttc_vehicle.unwrap_or_default(),
            cfg.ttc_threshold
        ));
    }
    if induced > cfg.decel_threshold {
        causes.push(format!(
            "induced braking of {:.2} m/s^2 on vehicle {} exceeds {} m/s^2",
            induced,
            induced_vehicle.unwrap_or_default(),
            cfg.decel_threshold
        ));
    }
    let safe = causes.is_empty();
    SafetyVerdict {
        safe,
        min_ttc,
        induced_decel: induced,
        cause: if safe { "no conflict".into() } else { causes.join("; ") },
    }
}
