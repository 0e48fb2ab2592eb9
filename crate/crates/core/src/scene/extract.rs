use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{SceneError, TrajectoryTable, HEADING_MIN_SPEED};
use crate::vehicle::{wrap_angle, VehicleState};

/// Scenario family a scene was drawn from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetTag {
    #[default]
    Highway,
    Intersection,
    Roundabout,
}

impl DatasetTag {
    pub const ALL: [DatasetTag; 3] = [DatasetTag::Highway, DatasetTag::Intersection, DatasetTag::Roundabout];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetTag::Highway => "highway",
            DatasetTag::Intersection => "intersection",
            DatasetTag::Roundabout => "roundabout",
        }
    }
}

impl fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetTag {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "highway" | "highd" => Ok(DatasetTag::Highway),
            "intersection" | "ind" => Ok(DatasetTag::Intersection),
            "roundabout" | "round" => Ok(DatasetTag::Roundabout),
            other => Err(SceneError::BadParameter(format!("unknown dataset tag {other:?}"))),
        }
    }
}

/// Lane situation of the ego vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LaneContext {
    Lanes { current: i32, left: u32, right: u32 },
    Junction { descriptor: String },
}

/// A surrounding road user with its pose relative to the ego vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub state: VehicleState,
    pub lane_id: Option<i32>,
    /// Longitudinal offset in the ego frame, positive ahead.
    pub rel_lon: f64,
    /// Lateral offset in the ego frame, positive to the left.
    pub rel_lat: f64,
    pub rel_heading: f64,
    pub distance: f64,
}

impl Neighbor {
    pub fn relative_to(ego: &VehicleState, state: VehicleState, lane_id: Option<i32>) -> Self {
        let (rel_lon, rel_lat) = ego.to_local(state.x, state.y);
        Neighbor {
            rel_heading: wrap_angle(state.heading - ego.heading),
            distance: rel_lon.hypot(rel_lat),
            rel_lon,
            rel_lat,
            state,
            lane_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub ego: VehicleState,
    pub ego_lane: Option<i32>,
    pub neighbors: Vec<Neighbor>,
    pub lane_context: LaneContext,
    pub frame: u32,
    pub navigation_instruction: String,
    pub dataset_tag: DatasetTag,
}

impl Scene {
    /// Builds a scene from absolute states, computing relative poses and
    /// ordering neighbors nearest-first.
    pub fn from_states(
        ego: VehicleState,
        ego_lane: Option<i32>,
        others: impl IntoIterator<Item = (VehicleState, Option<i32>)>,
        lane_context: LaneContext,
        navigation_instruction: impl Into<String>,
        dataset_tag: DatasetTag,
    ) -> Self {
        let mut neighbors: Vec<Neighbor> = others
            .into_iter()
            .filter(|(s, _)| s.id != ego.id)
            .map(|(s, lane)| Neighbor::relative_to(&ego, s, lane))
            .collect();
        sort_nearest(&mut neighbors);
        Scene {
            ego,
            ego_lane,
            neighbors,
            lane_context,
            frame: 0,
            navigation_instruction: navigation_instruction.into(),
            dataset_tag,
        }
    }

    pub fn neighbor_states(&self) -> Vec<VehicleState> {
        self.neighbors.iter().map(|n| n.state.clone()).collect()
    }

    pub fn neighbor(&self, id: i64) -> Option<&Neighbor> {
        self.neighbors.iter().find(|n| n.state.id == id)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.ego
            .validate()
            .map_err(|e| SceneError::BadParameter(format!("ego: {e}")))?;
        for n in &self.neighbors {
            if n.state.id == self.ego.id {
                return Err(SceneError::BadParameter("ego listed among neighbors".into()));
            }
            n.state
                .validate()
                .map_err(|e| SceneError::BadParameter(format!("vehicle {}: {e}", n.state.id)))?;
            if !(n.rel_lon.is_finite() && n.rel_lat.is_finite()) {
                return Err(SceneError::BadParameter(format!("vehicle {}: non-finite pose", n.state.id)));
            }
        }
        Ok(())
    }
}

fn sort_nearest(neighbors: &mut [Neighbor]) {
    neighbors.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.state.id.cmp(&b.state.id)));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractOptions {
    pub radius: f64,
    pub cap: usize,
    /// Wheelbase as a fraction of vehicle length, used to turn yaw rate
    /// into a steering angle.
    pub wheelbase_ratio: f64,
    pub lane_width: f64,
    pub navigation_instruction: String,
    pub dataset_tag: DatasetTag,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            radius: 50.0,
            cap: 8,
            wheelbase_ratio: 0.6,
            lane_width: 3.5,
            navigation_instruction: "Keep driving along the current road.".into(),
            dataset_tag: DatasetTag::Highway,
        }
    }
}

/// Scene around `ego_id` at `frame`: every other vehicle within the closed
/// ball of `radius`, nearest first, truncated at `cap`.
pub fn extract_scene(
    table: &TrajectoryTable,
    ego_id: i64,
    frame: u32,
    options: &ExtractOptions,
) -> Result<Scene, SceneError> {
    if !(options.radius.is_finite() && options.radius >= 0.0) {
        return Err(SceneError::BadParameter(format!("radius {}", options.radius)));
    }
    let range = table.frame_range(frame).ok_or(SceneError::UnknownFrame(frame))?;
    let ego_index = table
        .find(frame, ego_id)
        .ok_or(SceneError::UnknownEgo { id: ego_id, frame })?;
    let ego = table.state(ego_index, options.wheelbase_ratio);
    let ego_lane = table.row(ego_index).lane_id;

    let mut neighbors: Vec<Neighbor> = range
        .filter(|&i| i != ego_index)
        .map(|i| Neighbor::relative_to(&ego, table.state(i, options.wheelbase_ratio), table.row(i).lane_id))
        .filter(|n| n.distance <= options.radius)
        .collect();
    sort_nearest(&mut neighbors);
    neighbors.truncate(options.cap);

    let lane_context = match ego_lane {
        Some(current) => {
            let (left, right) = lane_counts(table, &ego, current, options.lane_width);
            LaneContext::Lanes { current, left, right }
        }
        None => LaneContext::Junction {
            descriptor: match options.dataset_tag {
                DatasetTag::Roundabout => "roundabout".into(),
                _ => "intersection".into(),
            },
        },
    };

    Ok(Scene {
        ego,
        ego_lane,
        neighbors,
        lane_context,
        frame,
        navigation_instruction: options.navigation_instruction.clone(),
        dataset_tag: options.dataset_tag,
    })
}

/// Lanes to the left and right of `current`, inferred from the mean lateral
/// offset (in the ego frame) of all observations travelling in the ego's
/// direction.
fn lane_counts(table: &TrajectoryTable, ego: &VehicleState, current: i32, lane_width: f64) -> (u32, u32) {
    let (dx, dy) = ego.direction();
    let mut sums: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for row in table.rows() {
        let Some(lane) = row.lane_id else { continue };
        if row.speed() <= HEADING_MIN_SPEED || row.x_velocity * dx + row.y_velocity * dy <= 0.0 {
            continue;
        }
        let (_, lat) = ego.to_local(row.x, row.y);
        let entry = sums.entry(lane).or_insert((0.0, 0));
        entry.0 += lat;
        entry.1 += 1;
    }
    let Some(&(sum, count)) = sums.get(&current) else {
        return (0, 0);
    };
    let reference = sum / count as f64;
    let mut left = 0;
    let mut right = 0;
    for (&lane, &(s, c)) in &sums {
        if lane == current {
            continue;
        }
        let lat = s / c as f64;
        if lat > reference + 0.5 * lane_width {
            left += 1;
        } else if lat < reference - 0.5 * lane_width {
            right += 1;
        }
    }
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::TrackRow;
    use crate::vehicle::VehicleClass;

    fn row(frame: u32, id: i64, x: f64, y: f64, lane: Option<i32>) -> TrackRow {
        TrackRow {
            frame,
            id,
            x,
            y,
            width: 1.8,
            length: 4.5,
            x_velocity: 20.0,
            y_velocity: 0.0,
            lane_id: lane,
            class: VehicleClass::Sedan,
            yaw_rate: None,
            heading: None,
        }
    }

    #[test]
    fn lone_ego() {
        let t = TrajectoryTable::from_rows(vec![row(0, 1, 0.0, 0.0, Some(2))], 25.0).unwrap();
        let s = extract_scene(&t, 1, 0, &ExtractOptions::default()).unwrap();
        assert!(s.neighbors.is_empty());
        assert_eq!(s.lane_context, LaneContext::Lanes { current: 2, left: 0, right: 0 });
    }

    #[test]
    fn closed_ball_and_cap() {
        let mut rows = vec![row(0, 1, 0.0, 0.0, Some(2))];
        rows.push(row(0, 2, 50.0, 0.0, Some(2)));
        rows.push(row(0, 3, 50.0001, 0.0, Some(2)));
        let t = TrajectoryTable::from_rows(rows, 25.0).unwrap();
        let s = extract_scene(&t, 1, 0, &ExtractOptions::default()).unwrap();
        assert_eq!(s.neighbors.len(), 1);
        assert_eq!(s.neighbors[0].state.id, 2);

        let mut rows = vec![row(0, 1, 0.0, 0.0, Some(2))];
        for k in 0..12 {
            rows.push(row(0, 10 + k, 3.0 * (12 - k) as f64, 0.0, Some(2)));
        }
        let t = TrajectoryTable::from_rows(rows, 25.0).unwrap();
        let s = extract_scene(&t, 1, 0, &ExtractOptions::default()).unwrap();
        let ids: Vec<i64> = s.neighbors.iter().map(|n| n.state.id).collect();
        assert_eq!(ids, vec![21, 20, 19, 18, 17, 16, 15, 14]);
    }

    #[test]
    fn unknown_ego_and_frame() {
        let t = TrajectoryTable::from_rows(vec![row(0, 1, 0.0, 0.0, None)], 25.0).unwrap();
        let o = ExtractOptions::default();
        assert!(matches!(extract_scene(&t, 9, 0, &o), Err(SceneError::UnknownEgo { .. })));
        assert!(matches!(extract_scene(&t, 1, 4, &o), Err(SceneError::UnknownFrame(4))));
    }

    #[test]
    fn lane_counts_from_traffic() {
        let rows = vec![
            row(0, 1, 0.0, 0.0, Some(2)),
            row(0, 2, 30.0, 3.5, Some(3)),
            row(0, 3, -30.0, 7.0, Some(4)),
            row(0, 4, 10.0, -3.5, Some(1)),
        ];
        let t = TrajectoryTable::from_rows(rows, 25.0).unwrap();
        let s = extract_scene(&t, 1, 0, &ExtractOptions::default()).unwrap();
        assert_eq!(s.lane_context, LaneContext::Lanes { current: 2, left: 2, right: 1 });
        let n = s.neighbor(2).unwrap();
        assert_eq!((n.rel_lon, n.rel_lat), (30.0, 3.5));
    }

    #[test]
    fn junction_without_lanes() {
        let t = TrajectoryTable::from_rows(vec![row(0, 1, 0.0, 0.0, None)], 25.0).unwrap();
        let o = ExtractOptions {
            dataset_tag: DatasetTag::Roundabout,
            ..ExtractOptions::default()
        };
        let s = extract_scene(&t, 1, 0, &o).unwrap();
        assert_eq!(s.lane_context, LaneContext::Junction { descriptor: "roundabout".into() });
    }
}
