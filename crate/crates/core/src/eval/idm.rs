use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::scene::{Action, Scene};

/// Intelligent Driver Model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    /// Desired speed v0, m/s.
    pub desired_speed: f64,
    /// Desired time headway T, s.
    pub time_headway: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    /// Jam distance s0, m.
    pub min_gap: f64,
    pub accel_exponent: f64,
    /// Lower clamp of the returned acceleration, m/s².
    pub emergency_decel: f64,
    /// Accelerations beyond ±this value map to accelerate / decelerate.
    pub action_band: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            desired_speed: 30.0,
            time_headway: 1.5,
            max_accel: 1.5,
            comfortable_decel: 2.0,
            min_gap: 2.0,
            accel_exponent: 4.0,
            emergency_decel: 8.0,
            action_band: 0.3,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), EvalError> {
        let all = [
            self.desired_speed,
            self.time_headway,
            self.max_accel,
            self.comfortable_decel,
            self.min_gap,
            self.accel_exponent,
            self.emergency_decel,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) && self.action_band >= 0.0 {
            Ok(())
        } else {
            Err(EvalError::BadParameter("IDM parameters must be positive".into()))
        }
    }

    /// Desired dynamic gap s*. The velocity-dependent part is floored at
    /// zero so a leader pulling away never demands braking.
    pub fn desired_gap(&self, v: f64, closing_speed: f64) -> f64 {
        let dynamic = v * self.time_headway
            + v * closing_speed / (2.0 * (self.max_accel * self.comfortable_decel).sqrt());
        self.min_gap + dynamic.max(0.0)
    }
}

/// IDM acceleration for speed `v`, bumper gap `gap` and closing speed
/// `closing_speed = v - v_leader`, clamped to `[-emergency_decel,
/// max_accel]`. An infinite gap gives the free-road term.
pub fn idm_accel(v: f64, gap: f64, closing_speed: f64, params: &IdmParams) -> Result<f64, EvalError> {
    if !(gap > 0.0) {
        return Err(EvalError::NonPositiveGap(gap));
    }
    let free = (v / params.desired_speed).powf(params.accel_exponent);
    let interaction = if gap.is_infinite() {
        0.0
    } else {
        (params.desired_gap(v, closing_speed) / gap).powi(2)
    };
    let a = params.max_accel * (1.0 - free - interaction);
    Ok(a.clamp(-params.emergency_decel, params.max_accel))
}

/// Leader of the ego for the IDM baseline as (bumper gap, closing speed).
///
/// With lane ids the leader is the nearest same-lane neighbor ahead. At
/// junctions the nearest crossing vehicle ahead stands in as a virtual
/// obstacle at the point where its heading line meets the ego path (or at
/// its own longitudinal position when stationary).
pub fn idm_leader(scene: &Scene, lane_width: f64) -> Option<(f64, f64)> {
    let ego = &scene.ego;
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |lon: f64, half_length: f64, speed_along: f64| {
        if lon <= 0.0 {
            return;
        }
        let gap = (lon - 0.5 * ego.length - half_length).max(1e-3);
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, ego.speed - speed_along));
        }
    };
    for n in &scene.neighbors {
        let (c, s) = (n.rel_heading.cos(), n.rel_heading.sin());
        let speed_along = n.state.speed * c;
        let half_lon = 0.5 * (n.state.length * c.abs() + n.state.width * s.abs());
        match (scene.ego_lane, n.lane_id) {
            (Some(a), Some(b)) => {
                if a == b {
                    consider(n.rel_lon, half_lon, speed_along);
                }
            }
            _ => {
                let crossing = c.abs() < (std::f64::consts::FRAC_PI_6).cos();
                if !crossing {
                    if n.rel_lat.abs() < 0.5 * lane_width && c > 0.0 {
                        consider(n.rel_lon, half_lon, speed_along);
                    }
                } else if n.rel_lat.abs() <= 2.0 * lane_width {
                    let lon = if n.state.speed > 0.1 && s.abs() > 1e-9 {
                        let t = -n.rel_lat / (n.state.speed * s);
                        if t < 0.0 {
                            continue;
                        }
                        n.rel_lon + n.state.speed * c * t
                    } else {
                        n.rel_lon
                    };
                    consider(lon, 0.0, speed_along);
                }
            }
        }
    }
    best
}

/// IDM baseline decision; never changes lanes or turns.
pub fn idm_policy(scene: &Scene, params: &IdmParams, lane_width: f64) -> Action {
    let a = match idm_leader(scene, lane_width) {
        Some((gap, closing)) => idm_accel(scene.ego.speed, gap, closing, params),
        None => idm_accel(scene.ego.speed, f64::INFINITY, 0.0, params),
    }
    .unwrap_or(-params.emergency_decel);
    if a > params.action_band {
        Action::Accelerate
    } else if a < -params.action_band {
        Action::Decelerate
    } else {
        Action::Idle
    }
}
