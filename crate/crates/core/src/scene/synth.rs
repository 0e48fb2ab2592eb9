//! Deterministic kinematic scenarios at 25 Hz.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SceneError, TrackRow, TrajectoryTable};
use crate::vehicle::{wrap_angle, VehicleClass};

pub const SYNTH_FRAME_RATE: f64 = 25.0;

/// Default footprint (length, width) used for synthetic vehicles of a class.
pub fn class_size(class: VehicleClass) -> (f64, f64) {
    match class {
        VehicleClass::Sedan | VehicleClass::Other => (4.5, 1.8),
        VehicleClass::Truck => (12.0, 2.5),
        VehicleClass::Bus => (12.0, 2.55),
        VehicleClass::Motorcycle => (2.2, 0.8),
        VehicleClass::Vru => (0.8, 0.8),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthSpec {
    CarFollowing(CarFollowing),
    LaneChangeConflict(LaneChangeConflict),
    IntersectionApproach(IntersectionApproach),
    RoundaboutMerge(RoundaboutMerge),
    HighwayTraffic(HighwayTraffic),
}

impl SynthSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            SynthSpec::CarFollowing(_) => "car_following",
            SynthSpec::LaneChangeConflict(_) => "lane_change_conflict",
            SynthSpec::IntersectionApproach(_) => "intersection_approach",
            SynthSpec::RoundaboutMerge(_) => "roundabout_merge",
            SynthSpec::HighwayTraffic(_) => "highway_traffic",
        }
    }

    /// Default parameters for a kind name.
    pub fn default_for(kind: &str) -> Result<Self, SceneError> {
        Ok(match kind {
            "car_following" => SynthSpec::CarFollowing(CarFollowing::default()),
            "lane_change_conflict" => SynthSpec::LaneChangeConflict(LaneChangeConflict::default()),
            "intersection_approach" => SynthSpec::IntersectionApproach(IntersectionApproach::default()),
            "roundabout_merge" => SynthSpec::RoundaboutMerge(RoundaboutMerge::default()),
            "highway_traffic" => SynthSpec::HighwayTraffic(HighwayTraffic::default()),
            other => return Err(SceneError::BadParameter(format!("unknown scenario kind {other:?}"))),
        })
    }
}

/// Ego (id 1) following a leader (id 2) in lane 2 along +x. The bumper gap
/// at frame 0 is `thw * speed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarFollowing {
    pub thw: f64,
    pub speed: f64,
    pub leader_speed: Option<f64>,
    pub ego_accel: f64,
    pub leader_accel: f64,
    pub ego_class: VehicleClass,
    pub leader_class: VehicleClass,
    pub frames: u32,
}

impl Default for CarFollowing {
    fn default() -> Self {
        CarFollowing {
            thw: 2.0,
            speed: 20.0,
            leader_speed: None,
            ego_accel: 0.0,
            leader_accel: 0.0,
            ego_class: VehicleClass::Sedan,
            leader_class: VehicleClass::Sedan,
            frames: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EgoManeuver {
    #[default]
    Keep,
    ChangeLeft,
}

/// Ego (id 1) in lane 2 behind a slower leader (id 2); an overtaker (id 6)
/// approaches from behind in the left lane 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaneChangeConflict {
    pub ego_speed: f64,
    pub leader_gap: f64,
    pub leader_speed: f64,
    pub overtaker: bool,
    /// Bumper gap between the overtaker's front and the ego's rear.
    pub overtaker_gap: f64,
    pub overtaker_speed: f64,
    pub lane_width: f64,
    pub ego_maneuver: EgoManeuver,
    pub lane_change_duration: f64,
    pub frames: u32,
}

impl Default for LaneChangeConflict {
    fn default() -> Self {
        LaneChangeConflict {
            ego_speed: 25.0,
            leader_gap: 40.0,
            leader_speed: 20.0,
            overtaker: true,
            overtaker_gap: 15.0,
            overtaker_speed: 35.0,
            lane_width: 3.5,
            ego_maneuver: EgoManeuver::Keep,
            lane_change_duration: 1.6,
            frames: 100,
        }
    }
}

/// Ego (id 1) drives along +x through the conflict point at the origin
/// while a stationary queue (ids 10, 11, ...) waits on the crossing street,
/// heading +y, its first front bumper `queue_gap` meters from the ego's lane
/// center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntersectionApproach {
    pub ego_speed: f64,
    pub start_distance: f64,
    pub approach_decel: f64,
    pub min_speed: f64,
    pub queue_length: u32,
    pub queue_gap: f64,
    pub queue_spacing: f64,
    pub frames: u32,
}

impl Default for IntersectionApproach {
    fn default() -> Self {
        IntersectionApproach {
            ego_speed: 10.0,
            start_distance: 60.0,
            approach_decel: 0.0,
            min_speed: 3.0,
            queue_length: 3,
            queue_gap: 2.0,
            queue_spacing: 7.0,
            frames: 250,
        }
    }
}

/// Ego (id 1) circulates counter-clockwise on a ring of `radius` around the
/// origin; a merger (id 2) waits stationary at the entry at `merger_angle`,
/// `merger_offset` meters outside the ring, facing the center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundaboutMerge {
    pub radius: f64,
    pub ego_speed: f64,
    pub start_angle: f64,
    pub merger: bool,
    pub merger_angle: f64,
    pub merger_offset: f64,
    pub frames: u32,
}

impl Default for RoundaboutMerge {
    fn default() -> Self {
        RoundaboutMerge {
            radius: 20.0,
            ego_speed: 8.0,
            start_angle: -FRAC_PI_2,
            merger: true,
            merger_angle: 0.0,
            merger_offset: 5.0,
            frames: 100,
        }
    }
}

/// Seeded free-flowing traffic on parallel lanes along +x, lane `k`
/// (id `k + 1`) centered at `y = k * lane_width`. Each lane has its own base
/// speed; vehicles keep constant velocity with a small per-vehicle spread.
/// Vehicle ids are `100 * lane + index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HighwayTraffic {
    pub lanes: u32,
    pub lane_width: f64,
    pub vehicles_per_lane: u32,
    pub min_gap: f64,
    pub max_gap: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Per-vehicle speed deviation from its lane speed, m/s.
    pub speed_spread: f64,
    pub truck_share: f64,
    pub seed: u64,
    pub frames: u32,
}

impl Default for HighwayTraffic {
    fn default() -> Self {
        HighwayTraffic {
            lanes: 3,
            lane_width: 3.5,
            vehicles_per_lane: 10,
            min_gap: 15.0,
            max_gap: 60.0,
            speed_min: 22.0,
            speed_max: 36.0,
            speed_spread: 1.0,
            truck_share: 0.15,
            seed: 1,
            frames: 100,
        }
    }
}

fn check(ok: bool, what: &str) -> Result<(), SceneError> {
    if ok {
        Ok(())
    } else {
        Err(SceneError::BadParameter(what.to_string()))
    }
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

/// Speed and travelled distance under constant acceleration, stopping at
/// zero speed.
fn kinematics(v0: f64, a: f64, t: f64) -> (f64, f64) {
    if a < 0.0 {
        let stop = v0 / -a;
        if t >= stop {
            return (0.0, v0 * stop + 0.5 * a * stop * stop);
        }
    }
    (v0 + a * t, v0 * t + 0.5 * a * t * t)
}

struct RowBuilder {
    rows: Vec<TrackRow>,
}

impl RowBuilder {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        frame: u32,
        id: i64,
        class: VehicleClass,
        (x, y): (f64, f64),
        (vx, vy): (f64, f64),
        heading: f64,
        yaw_rate: f64,
        lane_id: Option<i32>,
    ) {
        let (length, width) = class_size(class);
        self.rows.push(TrackRow {
            frame,
            id,
            x,
            y,
            width,
            length,
            x_velocity: vx,
            y_velocity: vy,
            lane_id,
            class,
            yaw_rate: Some(yaw_rate),
            heading: Some(wrap_angle(heading)),
        });
    }
}

pub fn synth_scenario(spec: &SynthSpec) -> Result<TrajectoryTable, SceneError> {
    let mut b = RowBuilder { rows: Vec::new() };
    let dt = 1.0 / SYNTH_FRAME_RATE;
    match spec {
        SynthSpec::CarFollowing(p) => {
            let leader_speed = p.leader_speed.unwrap_or(p.speed);
            check(p.thw.is_finite() && p.thw > 0.0, "thw must be positive")?;
            check(finite_nonneg(p.speed) && finite_nonneg(leader_speed), "speeds must be non-negative")?;
            check(p.ego_accel.is_finite() && p.leader_accel.is_finite(), "accelerations must be finite")?;
            check(p.frames >= 1, "frames must be at least 1")?;
            let (le, _) = class_size(p.ego_class);
            let (ll, _) = class_size(p.leader_class);
            let leader_x = p.thw * p.speed + 0.5 * (le + ll);
            for f in 0..p.frames {
                let t = f64::from(f) * dt;
                let (v, d) = kinematics(p.speed, p.ego_accel, t);
                b.push(f, 1, p.ego_class, (d, 0.0), (v, 0.0), 0.0, 0.0, Some(2));
                let (v, d) = kinematics(leader_speed, p.leader_accel, t);
                b.push(f, 2, p.leader_class, (leader_x + d, 0.0), (v, 0.0), 0.0, 0.0, Some(2));
            }
        }
        SynthSpec::LaneChangeConflict(p) => {
            check(
                finite_nonneg(p.ego_speed) && finite_nonneg(p.leader_speed) && finite_nonneg(p.overtaker_speed),
                "speeds must be non-negative",
            )?;
            check(finite_nonneg(p.leader_gap) && finite_nonneg(p.overtaker_gap), "gaps must be non-negative")?;
            check(p.lane_width.is_finite() && p.lane_width > 0.0, "lane_width must be positive")?;
            check(
                p.lane_change_duration.is_finite() && p.lane_change_duration > 0.0,
                "lane_change_duration must be positive",
            )?;
            check(p.frames >= 1, "frames must be at least 1")?;
            let w = p.lane_width;
            let d = p.lane_change_duration;
            for f in 0..p.frames {
                let t = f64::from(f) * dt;
                let x = p.ego_speed * t;
                let (y, vy) = match p.ego_maneuver {
                    EgoManeuver::Keep => (0.0, 0.0),
                    EgoManeuver::ChangeLeft if t < d => (
                        0.5 * w * (1.0 - (PI * t / d).cos()),
                        0.5 * w * PI / d * (PI * t / d).sin(),
                    ),
                    EgoManeuver::ChangeLeft => (w, 0.0),
                };
                let lane = if y > 0.5 * w { 3 } else { 2 };
                let heading = vy.atan2(p.ego_speed);
                b.push(f, 1, VehicleClass::Sedan, (x, y), (p.ego_speed, vy), heading, 0.0, Some(lane));
                let lx = p.leader_gap + 4.5 + p.leader_speed * t;
                b.push(f, 2, VehicleClass::Sedan, (lx, 0.0), (p.leader_speed, 0.0), 0.0, 0.0, Some(2));
                if p.overtaker {
                    let ox = -(p.overtaker_gap + 4.5) + p.overtaker_speed * t;
                    b.push(f, 6, VehicleClass::Sedan, (ox, w), (p.overtaker_speed, 0.0), 0.0, 0.0, Some(3));
                }
            }
        }
        SynthSpec::IntersectionApproach(p) => {
            check(p.ego_speed.is_finite() && p.ego_speed > 0.0, "ego_speed must be positive")?;
            check(p.start_distance.is_finite() && p.start_distance > 0.0, "start_distance must be positive")?;
            check(finite_nonneg(p.approach_decel), "approach_decel must be non-negative")?;
            check(
                p.min_speed.is_finite() && p.min_speed > 0.0 && p.min_speed <= p.ego_speed,
                "min_speed must be in (0, ego_speed]",
            )?;
            check(finite_nonneg(p.queue_gap), "queue_gap must be non-negative")?;
            check(p.queue_spacing.is_finite() && p.queue_spacing > 0.0, "queue_spacing must be positive")?;
            check(p.frames >= 1, "frames must be at least 1")?;
            let (ql, _) = class_size(VehicleClass::Sedan);
            let ramp = if p.approach_decel > 0.0 {
                (p.ego_speed - p.min_speed) / p.approach_decel
            } else {
                f64::INFINITY
            };
            for f in 0..p.frames {
                let t = f64::from(f) * dt;
                let (v, s) = if t <= ramp {
                    kinematics(p.ego_speed, -p.approach_decel, t)
                } else {
                    let (_, s0) = kinematics(p.ego_speed, -p.approach_decel, ramp);
                    (p.min_speed, s0 + p.min_speed * (t - ramp))
                };
                b.push(f, 1, VehicleClass::Sedan, (s - p.start_distance, 0.0), (v, 0.0), 0.0, 0.0, None);
                for k in 0..p.queue_length {
                    let y = -(p.queue_gap + 0.5 * ql) - f64::from(k) * p.queue_spacing;
                    b.push(f, 10 + i64::from(k), VehicleClass::Sedan, (0.0, y), (0.0, 0.0), FRAC_PI_2, 0.0, None);
                }
            }
        }
        SynthSpec::RoundaboutMerge(p) => {
            check(p.radius.is_finite() && p.radius > 0.0, "radius must be positive")?;
            check(p.ego_speed.is_finite() && p.ego_speed > 0.0, "ego_speed must be positive")?;
            check(p.start_angle.is_finite() && p.merger_angle.is_finite(), "angles must be finite")?;
            check(finite_nonneg(p.merger_offset), "merger_offset must be non-negative")?;
            check(p.frames >= 1, "frames must be at least 1")?;
            let r = p.radius;
            let omega = p.ego_speed / r;
            for f in 0..p.frames {
                let t = f64::from(f) * dt;
                let phi = p.start_angle + omega * t;
                let (s, c) = phi.sin_cos();
                let v = p.ego_speed;
                b.push(f, 1, VehicleClass::Sedan, (r * c, r * s), (-v * s, v * c), phi + FRAC_PI_2, omega, None);
                if p.merger {
                    let rm = r + p.merger_offset;
                    let (ms, mc) = p.merger_angle.sin_cos();
                    b.push(f, 2, VehicleClass::Sedan, (rm * mc, rm * ms), (0.0, 0.0), p.merger_angle + PI, 0.0, None);
                }
            }
        }
        SynthSpec::HighwayTraffic(p) => {
            check(p.lanes >= 1 && p.vehicles_per_lane >= 1, "lanes and vehicles_per_lane must be at least 1")?;
            check(p.lane_width.is_finite() && p.lane_width > 0.0, "lane_width must be positive")?;
            check(
                finite_nonneg(p.min_gap) && p.max_gap.is_finite() && p.max_gap >= p.min_gap,
                "gaps must satisfy 0 <= min_gap <= max_gap",
            )?;
            check(
                finite_nonneg(p.speed_min) && p.speed_max.is_finite() && p.speed_max >= p.speed_min,
                "speeds must satisfy 0 <= speed_min <= speed_max",
            )?;
            check(finite_nonneg(p.speed_spread), "speed_spread must be non-negative")?;
            check((0.0..=1.0).contains(&p.truck_share), "truck_share must be in [0, 1]")?;
            check(p.frames >= 1, "frames must be at least 1")?;
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            let horizon = f64::from(p.frames - 1) * dt;
            let mut vehicles = Vec::new();
            for lane in 0..p.lanes {
                let lane_speed = rng.gen_range(p.speed_min..=p.speed_max);
                let mut rear_x = 0.0;
                let mut ahead_speed = f64::INFINITY;
                // placed front to back so each follower's closing stays bounded
                for k in 0..p.vehicles_per_lane {
                    let class = if rng.gen_bool(p.truck_share) {
                        VehicleClass::Truck
                    } else {
                        VehicleClass::Sedan
                    };
                    let (length, _) = class_size(class);
                    let mut v = (lane_speed + rng.gen_range(-p.speed_spread..=p.speed_spread)).max(0.0);
                    let gap = rng.gen_range(p.min_gap..=p.max_gap);
                    if ahead_speed.is_finite() && v > ahead_speed {
                        // never close more than half the gap within the episode
                        v = v.min(ahead_speed + 0.5 * gap / horizon.max(dt));
                    }
                    let x = if k == 0 { 0.0 } else { rear_x - gap - 0.5 * length };
                    rear_x = x - 0.5 * length;
                    ahead_speed = v;
                    let id = 100 * i64::from(lane + 1) + i64::from(k);
                    vehicles.push((id, class, x, f64::from(lane) * p.lane_width, v, lane as i32 + 1));
                }
            }
            for f in 0..p.frames {
                let t = f64::from(f) * dt;
                for &(id, class, x, y, v, lane) in &vehicles {
                    b.push(f, id, class, (x + v * t, y), (v, 0.0), 0.0, 0.0, Some(lane));
                }
            }
        }
    }
    let mut table = TrajectoryTable::from_rows(b.rows, SYNTH_FRAME_RATE)?;
    table.metadata.insert("kind".into(), spec.kind().into());
    Ok(table)
}
