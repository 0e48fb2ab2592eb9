use std::fmt::Write;

use super::{LaneContext, Neighbor, Scene};

/// One decimal place without a negative zero.
pub(crate) fn fmt1(v: f64) -> String {
    let s = format!("{v:.1}");
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

fn plural(n: u32, word: &str) -> String {
    if n == 1 {
        format!("1 {word}")
    } else {
        format!("{n} {word}s")
    }
}

/// Relation of a neighbor to the ego lane as shown in the scene text.
pub(crate) fn lane_relation(scene: &Scene, n: &Neighbor) -> String {
    match (scene.ego_lane, n.lane_id) {
        (Some(ego), Some(other)) if ego == other => "same lane".into(),
        (Some(ego), Some(other)) if (ego - other).abs() == 1 && n.rel_lat > 0.0 => "adjacent left lane".into(),
        (Some(ego), Some(other)) if (ego - other).abs() == 1 && n.rel_lat < 0.0 => "adjacent right lane".into(),
        (Some(_), Some(other)) => format!("lane {other}"),
        _ => {
            let h = n.rel_heading.abs();
            if h < std::f64::consts::FRAC_PI_6 {
                "same direction".into()
            } else if h > 5.0 * std::f64::consts::FRAC_PI_6 {
                "oncoming".into()
            } else {
                "crossing traffic".into()
            }
        }
    }
}

/// Deterministic textual description: an ego line, one line per neighbor in
/// ascending id, then the navigation instruction.
pub fn render_scene_text(scene: &Scene) -> String {
    let ego = &scene.ego;
    let mut out = String::new();
    let place = match &scene.lane_context {
        LaneContext::Lanes { current, left, right } => format!(
            "lane {current} ({} to the left, {} to the right)",
            plural(*left, "lane"),
            plural(*right, "lane")
        ),
        LaneContext::Junction { descriptor } => format!("approaching the {descriptor}"),
    };
    let _ = writeln!(
        out,
        "Ego vehicle {} ({}), {place}: position ({}, {}) m, heading {} deg, speed {} m/s.",
        ego.id,
        ego.class.as_str(),
        fmt1(ego.x),
        fmt1(ego.y),
        fmt1(ego.heading.to_degrees()),
        fmt1(ego.speed),
    );

    let mut order: Vec<&Neighbor> = scene.neighbors.iter().collect();
    order.sort_by_key(|n| n.state.id);
    for n in order {
        let _ = writeln!(
            out,
            "Vehicle {} ({}), {}: {} m {}, {} m to the {}, position ({}, {}) m, speed {} m/s, relative heading {} deg.",
            n.state.id,
            n.state.class.as_str(),
            lane_relation(scene, n),
            fmt1(n.rel_lon.abs()),
            if n.rel_lon < 0.0 { "behind" } else { "ahead" },
            fmt1(n.rel_lat.abs()),
            if n.rel_lat < 0.0 { "right" } else { "left" },
            fmt1(n.state.x),
            fmt1(n.state.y),
            fmt1(n.state.speed),
            fmt1(n.rel_heading.to_degrees()),
        );
    }
    let _ = write!(out, "Navigation: {}", scene.navigation_instruction);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::DatasetTag;
    use crate::vehicle::VehicleState;

    fn scene(others: Vec<(VehicleState, Option<i32>)>) -> Scene {
        Scene::from_states(
            VehicleState::sedan(1, 0.0, 0.0, 0.0, 25.0),
            Some(2),
            others,
            LaneContext::Lanes { current: 2, left: 1, right: 0 },
            "Change to the left lane.",
            DatasetTag::Highway,
        )
    }

    #[test]
    fn zero_neighbors() {
        let text = render_scene_text(&scene(vec![]));
        assert_eq!(
            text,
            "Ego vehicle 1 (sedan), lane 2 (1 lane to the left, 0 lanes to the right): \
             position (0.0, 0.0) m, heading 0.0 deg, speed 25.0 m/s.\n\
             Navigation: Change to the left lane."
        );
    }

    #[test]
    fn neighbors_by_ascending_id() {
        let a = (VehicleState::sedan(9, 10.0, 0.0, 0.0, 20.0), Some(2));
        let b = (VehicleState::sedan(4, -30.0, 3.5, 0.0, 30.0), Some(3));
        let text = render_scene_text(&scene(vec![a.clone(), b.clone()]));
        assert_eq!(text, render_scene_text(&scene(vec![b, a])));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("Vehicle 4 (sedan), adjacent left lane: 30.0 m behind, 3.5 m to the left"));
        assert!(lines[2].starts_with("Vehicle 9 (sedan), same lane: 10.0 m ahead"));
    }

    #[test]
    fn no_negative_zero() {
        assert_eq!(fmt1(-0.04), "0.0");
        assert_eq!(fmt1(-0.06), "-0.1");
    }
}
