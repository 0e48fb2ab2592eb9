use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{extract_scene, Action, ExtractOptions, Scene, SceneError, TrajectoryTable};
use crate::vehicle::wrap_angle;

/// Thresholds of the heuristic next-action labeler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelerConfig {
    /// Look-ahead in frames.
    pub horizon: u32,
    /// Heading change (rad) over the horizon that counts as a turn.
    pub turn_threshold: f64,
    /// Mean longitudinal acceleration (m/s²) that counts as speeding up or
    /// braking.
    pub accel_threshold: f64,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        LabelerConfig {
            horizon: 25,
            turn_threshold: 0.2,
            accel_threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    File,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScene {
    /// Stable identifier used in logs.
    pub id: String,
    pub scene: Scene,
    pub true_label: Action,
    pub label_source: LabelSource,
}

/// Action the ego driver took over the following `horizon` frames.
///
/// Rules in priority order: a lane id change gives a lane change in the
/// direction of the lateral displacement; otherwise a heading change beyond
/// the turn threshold gives a turn; otherwise the mean acceleration decides
/// between accelerate, decelerate and idle.
pub fn label_action(
    table: &TrajectoryTable,
    ego_id: i64,
    frame: u32,
    config: &LabelerConfig,
) -> Result<Action, SceneError> {
    let start = table
        .find(frame, ego_id)
        .ok_or(SceneError::UnknownEgo { id: ego_id, frame })?;
    let end_frame = u64::from(frame) + u64::from(config.horizon);
    let end = u32::try_from(end_frame)
        .ok()
        .and_then(|f| table.find(f, ego_id))
        .ok_or(SceneError::TrackTooShort {
            id: ego_id,
            needed: end_frame,
        })?;
    let first = table.row(start);
    let last = table.row(end);
    let ego = table.state(start, 0.6);

    if let Some(lane) = first.lane_id {
        let changed = table.track(ego_id).iter().any(|&i| {
            let r = table.row(i);
            r.frame > frame && u64::from(r.frame) <= end_frame && r.lane_id.is_some_and(|l| l != lane)
        });
        if changed {
            let (_, lat) = ego.to_local(last.x, last.y);
            if lat > 0.0 {
                return Ok(Action::LaneChangeLeft);
            }
            if lat < 0.0 {
                return Ok(Action::LaneChangeRight);
            }
        }
    }

    let turn = wrap_angle(table.heading(end) - table.heading(start));
    if turn > config.turn_threshold {
        return Ok(Action::TurnLeft);
    }
    if turn < -config.turn_threshold {
        return Ok(Action::TurnRight);
    }

    if config.horizon > 0 {
        let duration = f64::from(config.horizon) / table.frame_rate();
        let accel = (last.speed() - first.speed()) / duration;
        if accel > config.accel_threshold {
            return Ok(Action::Accelerate);
        }
        if accel < -config.accel_threshold {
            return Ok(Action::Decelerate);
        }
    }
    Ok(Action::Idle)
}

/// Ground-truth labels read from a file, keyed by `(ego_id, frame)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelOverrides {
    pub labels: BTreeMap<(i64, u32), Action>,
}

impl LabelOverrides {
    pub fn get(&self, ego_id: i64, frame: u32) -> Option<Action> {
        self.labels.get(&(ego_id, frame)).copied()
    }
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelOverrides, SceneError> {
    parse_labels(std::fs::File::open(path.as_ref())?)
}

/// Reads a CSV with header `ego_id,frame,action`.
pub fn parse_labels<R: Read>(reader: R) -> Result<LabelOverrides, SceneError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| SceneError::MissingColumn(name.to_string()))
    };
    let (ego_col, frame_col, action_col) = (position("ego_id")?, position("frame")?, position("action")?);
    let mut out = LabelOverrides::default();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |reason: String| SceneError::LabelFile { line, reason };
        let ego: i64 = record
            .get(ego_col)
            .unwrap_or_default()
            .parse()
            .map_err(|_| bad("ego_id is not an integer".into()))?;
        let frame: u32 = record
            .get(frame_col)
            .unwrap_or_default()
            .parse()
            .map_err(|_| bad("frame is not a non-negative integer".into()))?;
        let action: Action = record
            .get(action_col)
            .unwrap_or_default()
            .parse()
            .map_err(|e| bad(format!("{e}")))?;
        if out.labels.insert((ego, frame), action).is_some() {
            return Err(bad(format!("duplicate label for ego {ego} at frame {frame}")));
        }
    }
    Ok(out)
}

/// Extracts the scene and attaches its label, preferring the override file.
pub fn labeled_scene(
    table: &TrajectoryTable,
    ego_id: i64,
    frame: u32,
    extract: &ExtractOptions,
    labeler: &LabelerConfig,
    overrides: Option<&LabelOverrides>,
) -> Result<LabeledScene, SceneError> {
    let scene = extract_scene(table, ego_id, frame, extract)?;
    let (true_label, label_source) = match overrides.and_then(|o| o.get(ego_id, frame)) {
        Some(a) => (a, LabelSource::File),
        None => (label_action(table, ego_id, frame, labeler)?, LabelSource::Heuristic),
    };
    Ok(LabeledScene {
        id: format!("{}-ego{ego_id}-f{frame}", extract.dataset_tag),
        scene,
        true_label,
        label_source,
    })
}

/// Labeled scenes of every track, one every `stride` frames from its first
/// frame, ordered by ego id then frame. Frames without a track row at the
/// end of the label horizon are skipped unless the override file labels them.
pub fn labeled_scenes(
    table: &TrajectoryTable,
    extract: &ExtractOptions,
    labeler: &LabelerConfig,
    overrides: Option<&LabelOverrides>,
    stride: u32,
) -> Result<Vec<LabeledScene>, SceneError> {
    if stride == 0 {
        return Err(SceneError::BadParameter("stride must be at least 1".into()));
    }
    let mut out = Vec::new();
    for id in table.track_ids() {
        let rows = table.track(id);
        let (Some(&first), Some(&last)) = (rows.first(), rows.last()) else {
            continue;
        };
        let (first, last) = (table.row(first).frame, table.row(last).frame);
        for frame in (first..=last).step_by(stride as usize) {
            if table.find(frame, id).is_none() {
                continue;
            }
            let labeled = overrides.is_some_and(|o| o.get(id, frame).is_some());
            let end = frame.checked_add(labeler.horizon);
            if !labeled && end.is_none_or(|end| table.find(end, id).is_none()) {
                continue;
            }
            out.push(labeled_scene(table, id, frame, extract, labeler, overrides)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::TrackRow;
    use crate::vehicle::VehicleClass;

    fn track(n: u32, f: impl Fn(f64) -> (f64, f64, f64, f64, i32)) -> TrajectoryTable {
        let rows = (0..n)
            .map(|k| {
                let (x, y, vx, vy, lane) = f(f64::from(k) / 25.0);
                TrackRow {
                    frame: k,
                    id: 1,
                    x,
                    y,
                    width: 1.8,
                    length: 4.5,
                    x_velocity: vx,
                    y_velocity: vy,
                    lane_id: Some(lane),
                    class: VehicleClass::Sedan,
                    yaw_rate: None,
                    heading: None,
                }
            })
            .collect();
        TrajectoryTable::from_rows(rows, 25.0).unwrap()
    }

    #[test]
    fn constant_velocity_is_idle() {
        let t = track(40, |t| (20.0 * t, 0.0, 20.0, 0.0, 2));
        assert_eq!(label_action(&t, 1, 0, &LabelerConfig::default()).unwrap(), Action::Idle);
    }

    #[test]
    fn lane_change_left() {
        let t = track(40, |t| (20.0 * t, t * t, 20.0, 2.0 * t, if t < 0.8 { 2 } else { 3 }));
        assert_eq!(label_action(&t, 1, 0, &LabelerConfig::default()).unwrap(), Action::LaneChangeLeft);
    }

    #[test]
    fn braking() {
        let t = track(40, |t| (20.0 * t - 0.5 * t * t, 0.0, 20.0 - t, 0.0, 2));
        assert_eq!(label_action(&t, 1, 0, &LabelerConfig::default()).unwrap(), Action::Decelerate);
    }

    #[test]
    fn too_short() {
        let t = track(20, |t| (20.0 * t, 0.0, 20.0, 0.0, 2));
        assert!(matches!(
            label_action(&t, 1, 0, &LabelerConfig::default()),
            Err(SceneError::TrackTooShort { id: 1, needed: 25 })
        ));
    }

    #[test]
    fn label_file_override() {
        let o = parse_labels("ego_id,frame,action\n1,0,turn_right\n".as_bytes()).unwrap();
        let t = track(40, |t| (20.0 * t, 0.0, 20.0, 0.0, 2));
        let s = labeled_scene(&t, 1, 0, &ExtractOptions::default(), &LabelerConfig::default(), Some(&o)).unwrap();
        assert_eq!((s.true_label, s.label_source), (Action::TurnRight, LabelSource::File));
        let s = labeled_scene(&t, 1, 0, &ExtractOptions::default(), &LabelerConfig::default(), None).unwrap();
        assert_eq!((s.true_label, s.label_source), (Action::Idle, LabelSource::Heuristic));
    }

    #[test]
    fn bad_label_file() {
        let err = parse_labels("ego_id,frame,action\n1,0,merge\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SceneError::LabelFile { line: 2, .. }), "{err}");
        assert!(matches!(
            parse_labels("ego,frame,action\n".as_bytes()),
            Err(SceneError::MissingColumn(_))
        ));
    }
}
