//! Bundled synthetic evaluation suites, twenty labeled scenes per scenario
//! family.

use super::synth::{CarFollowing, EgoManeuver, IntersectionApproach, LaneChangeConflict, RoundaboutMerge};
use super::{labeled_scene, DatasetTag, ExtractOptions, LabeledScene, LabelerConfig, SceneError, SynthSpec};
use crate::scene::synth_scenario;

pub const FOLLOW_INSTRUCTION: &str = "Keep following the current lane.";
pub const OVERTAKE_INSTRUCTION: &str = "Change to the left lane to overtake the slower vehicle ahead.";
pub const CROSS_INSTRUCTION: &str = "Cross the intersection straight ahead.";
pub const ROUNDABOUT_INSTRUCTION: &str = "Continue around the roundabout to the next exit.";

/// One suite entry: scenario, ego frame and navigation instruction.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub id: String,
    pub spec: SynthSpec,
    pub frame: u32,
    pub instruction: &'static str,
}

fn highway() -> Vec<SuiteEntry> {
    let mut out = Vec::new();
    let following = [
        (0.8, 20.0, -1.0),
        (1.0, 25.0, -1.0),
        (1.2, 22.0, -1.0),
        (1.0, 18.0, -1.5),
        (2.0, 20.0, 0.0),
        (1.8, 25.0, 0.0),
        (1.6, 28.0, 0.0),
        (2.0, 15.0, 0.0),
        (3.0, 20.0, 1.0),
        (3.5, 18.0, 1.0),
        (3.0, 25.0, 0.8),
        (4.0, 15.0, 1.0),
    ];
    for (thw, speed, ego_accel) in following {
        out.push(SuiteEntry {
            id: format!("highway-{:02}-car_following", out.len() + 1),
            spec: SynthSpec::CarFollowing(CarFollowing {
                thw,
                speed,
                ego_accel,
                ..CarFollowing::default()
            }),
            frame: 0,
            instruction: FOLLOW_INSTRUCTION,
        });
    }
    for (overtaker_gap, overtaker_speed) in [(15.0, 35.0), (12.0, 33.0), (18.0, 36.0), (10.0, 32.0)] {
        out.push(SuiteEntry {
            id: format!("highway-{:02}-lane_change_conflict", out.len() + 1),
            spec: SynthSpec::LaneChangeConflict(LaneChangeConflict {
                overtaker_gap,
                overtaker_speed,
                ..LaneChangeConflict::default()
            }),
            frame: 0,
            instruction: OVERTAKE_INSTRUCTION,
        });
    }
    for ego_speed in [25.0, 24.0, 26.0, 23.0] {
        out.push(SuiteEntry {
            id: format!("highway-{:02}-free_lane_change", out.len() + 1),
            spec: SynthSpec::LaneChangeConflict(LaneChangeConflict {
                ego_speed,
                overtaker: false,
                ego_maneuver: EgoManeuver::ChangeLeft,
                ..LaneChangeConflict::default()
            }),
            frame: 0,
            instruction: OVERTAKE_INSTRUCTION,
        });
    }
    out
}

fn intersection() -> Vec<SuiteEntry> {
    let mut out = Vec::new();
    for (k, ego_speed) in [8.0, 10.0, 12.0, 14.0].into_iter().enumerate() {
        for (start_distance, approach_decel) in [(30.0, 0.0), (45.0, 0.0), (60.0, 0.0), (25.0, 1.0), (40.0, 1.0)] {
            out.push(SuiteEntry {
                id: format!("intersection-{:02}-approach", out.len() + 1),
                spec: SynthSpec::IntersectionApproach(IntersectionApproach {
                    ego_speed,
                    start_distance,
                    approach_decel,
                    queue_length: 1 + (k as u32 % 3),
                    ..IntersectionApproach::default()
                }),
                frame: 0,
                instruction: CROSS_INSTRUCTION,
            });
        }
    }
    out
}

fn roundabout() -> Vec<SuiteEntry> {
    let mut out = Vec::new();
    for (radius, ego_speed) in [(15.0, 6.0), (20.0, 8.0), (25.0, 8.0), (20.0, 6.0)] {
        for start in [-1.0, -0.75, -0.5, -0.25, 0.5] {
            out.push(SuiteEntry {
                id: format!("roundabout-{:02}-merge", out.len() + 1),
                spec: SynthSpec::RoundaboutMerge(RoundaboutMerge {
                    radius,
                    ego_speed,
                    start_angle: start * std::f64::consts::PI,
                    ..RoundaboutMerge::default()
                }),
                frame: 0,
                instruction: ROUNDABOUT_INSTRUCTION,
            });
        }
    }
    out
}

pub fn suite_entries(tag: DatasetTag) -> Vec<SuiteEntry> {
    match tag {
        DatasetTag::Highway => highway(),
        DatasetTag::Intersection => intersection(),
        DatasetTag::Roundabout => roundabout(),
    }
}

/// Builds the labeled scenes of one family from the bundled entries.
pub fn builtin_suite(tag: DatasetTag, labeler: &LabelerConfig) -> Result<Vec<LabeledScene>, SceneError> {
    suite_entries(tag)
        .into_iter()
        .map(|entry| {
            let table = synth_scenario(&entry.spec)?;
            let options = ExtractOptions {
                navigation_instruction: entry.instruction.to_string(),
                dataset_tag: tag,
                ..ExtractOptions::default()
            };
            let mut scene = labeled_scene(&table, 1, entry.frame, &options, labeler, None)?;
            scene.id = entry.id;
            Ok(scene)
        })
        .collect()
}

/// All three families in the order highway, intersection, roundabout.
pub fn builtin_suite_all(labeler: &LabelerConfig) -> Result<Vec<LabeledScene>, SceneError> {
    let mut out = Vec::new();
    for tag in DatasetTag::ALL {
        out.extend(builtin_suite(tag, labeler)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Action;

    #[test]
    fn twenty_per_family_with_expected_labels() {
        let labeler = LabelerConfig::default();
        for tag in DatasetTag::ALL {
            let scenes = builtin_suite(tag, &labeler).unwrap();
            assert_eq!(scenes.len(), 20, "{tag}");
            for s in &scenes {
                s.scene.validate().unwrap();
                assert_eq!(s.scene.dataset_tag, tag);
            }
        }
        let hw = builtin_suite(DatasetTag::Highway, &labeler).unwrap();
        let labels: Vec<Action> = hw.iter().map(|s| s.true_label).collect();
        use Action::*;
        assert_eq!(
            labels,
            vec![
                Decelerate, Decelerate, Decelerate, Decelerate, Idle, Idle, Idle, Idle, Accelerate, Accelerate,
                Accelerate, Accelerate, Idle, Idle, Idle, Idle, LaneChangeLeft, LaneChangeLeft, LaneChangeLeft,
                LaneChangeLeft,
            ]
        );
        let rb = builtin_suite(DatasetTag::Roundabout, &labeler).unwrap();
        assert!(rb.iter().all(|s| s.true_label == TurnLeft));
        let is = builtin_suite(DatasetTag::Intersection, &labeler).unwrap();
        assert_eq!(is.iter().filter(|s| s.true_label == Decelerate).count(), 8);
        assert_eq!(is.iter().filter(|s| s.true_label == Idle).count(), 12);
    }
}
