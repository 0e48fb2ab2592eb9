use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::risk_field::{GridSpec, RiskModel};
use crate::scene::synth::{class_size, CarFollowing, IntersectionApproach, SynthSpec};
use crate::scene::{extract_scene, synth_scenario, ExtractOptions};
use crate::vehicle::{VehicleClass, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Thw,
    Lateral,
    Class,
    IntersectionProfile,
}

impl SweepKind {
    pub const ALL: [SweepKind; 4] = [
        SweepKind::Thw,
        SweepKind::Lateral,
        SweepKind::Class,
        SweepKind::IntersectionProfile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Thw => "thw",
            SweepKind::Lateral => "lateral",
            SweepKind::Class => "class",
            SweepKind::IntersectionProfile => "intersection_profile",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| EvalError::BadParameter(format!("unknown sweep kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepParams {
    /// Time headways of the car-following sweep, s.
    pub thw: Vec<f64>,
    /// Lateral offsets of the parallel vehicle, m.
    pub lateral: Vec<f64>,
    /// Longitudinal position of the parallel vehicle ahead of the ego, m.
    pub lateral_ahead: f64,
    pub classes: Vec<VehicleClass>,
    /// Headway of the class sweep's leader, s.
    pub class_thw: f64,
    /// Give each class its own footprint instead of the sedan footprint.
    /// With a shared footprint the front QPR is exactly proportional to cost.
    pub class_sizes: bool,
    pub speed: f64,
    pub intersection: IntersectionApproach,
    /// Length of the approach stretch that ends at the conflict point, m.
    pub conflict_window: f64,
    pub grid: GridSpec,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            thw: (2..=16).map(|k| f64::from(k) * 0.25).collect(),
            lateral: (1..=12).map(|k| f64::from(k) * 0.5).collect(),
            lateral_ahead: 30.0,
            classes: vec![
                VehicleClass::Sedan,
                VehicleClass::Truck,
                VehicleClass::Bus,
                VehicleClass::Motorcycle,
                VehicleClass::Vru,
            ],
            class_thw: 2.0,
            class_sizes: false,
            speed: 20.0,
            intersection: IntersectionApproach::default(),
            conflict_window: 40.0,
            grid: GridSpec {
                length: 220.0,
                width: 30.0,
                resolution: 0.5,
            },
        }
    }
}

/// One sweep point. `x` is the headway, lateral offset or, for the
/// intersection profile, the ego's signed distance past the conflict point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: f64,
    pub label: String,
    pub total: f64,
    pub front: f64,
    pub rear: f64,
}

fn row(model: &RiskModel, grid: &GridSpec, ego: &VehicleState, others: &[VehicleState], x: f64, label: String) -> SweepRow {
    let r = model.qpr_total(ego, others, &grid.around(ego));
    SweepRow {
        x,
        label,
        total: r.total,
        front: r.front,
        rear: r.rear,
    }
}

/// Extraction that keeps every vehicle on the sweep grid.
fn sweep_extraction(grid: &GridSpec) -> ExtractOptions {
    ExtractOptions {
        radius: grid.length.hypot(grid.width),
        ..ExtractOptions::default()
    }
}

fn first_frame(spec: SynthSpec, grid: &GridSpec) -> Result<(VehicleState, Vec<VehicleState>), EvalError> {
    let table = synth_scenario(&spec)?;
    let scene = extract_scene(&table, 1, 0, &sweep_extraction(grid))?;
    Ok((scene.ego.clone(), scene.neighbor_states()))
}

fn positive(values: &[f64], what: &str) -> Result<(), EvalError> {
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(EvalError::BadParameter(format!("{what} must be a non-empty list of positive values")));
    }
    Ok(())
}

/// QPR as one scene parameter varies.
pub fn qpr_sweep(kind: SweepKind, params: &SweepParams, model: &RiskModel) -> Result<Vec<SweepRow>, EvalError> {
    if !params.grid.is_valid() {
        return Err(EvalError::BadParameter("sweep grid must have positive extent".into()));
    }
    if !(params.speed.is_finite() && params.speed >= 0.0) {
        return Err(EvalError::BadParameter(format!("speed {}", params.speed)));
    }
    let g = &params.grid;
    match kind {
        SweepKind::Thw => {
            positive(&params.thw, "thw")?;
            params
                .thw
                .iter()
                .map(|&thw| {
                    let (ego, others) = first_frame(SynthSpec::CarFollowing(CarFollowing {
                        thw,
                        speed: params.speed,
                        ..CarFollowing::default()
                    }), g)?;
                    Ok(row(model, g, &ego, &others, thw, String::new()))
                })
                .collect()
        }
        SweepKind::Lateral => {
            positive(&params.lateral, "lateral")?;
            let ego = VehicleState::sedan(1, 0.0, 0.0, 0.0, params.speed);
            Ok(params
                .lateral
                .iter()
                .map(|&offset| {
                    let other = VehicleState::sedan(2, params.lateral_ahead, offset, 0.0, params.speed);
                    row(model, g, &ego, &[other], offset, String::new())
                })
                .collect())
        }
        SweepKind::Class => {
            positive(&[params.class_thw], "class_thw")?;
            if params.classes.is_empty() {
                return Err(EvalError::BadParameter("classes must not be empty".into()));
            }
            let ego = VehicleState::sedan(1, 0.0, 0.0, 0.0, params.speed);
            let (sedan_length, sedan_width) = class_size(VehicleClass::Sedan);
            Ok(params
                .classes
                .iter()
                .map(|&class| {
                    let (length, width) = if params.class_sizes {
                        class_size(class)
                    } else {
                        (sedan_length, sedan_width)
                    };
                    let x = params.class_thw * params.speed + 0.5 * (ego.length + length);
                    let other = VehicleState::sedan(2, x, 0.0, 0.0, params.speed)
                        .with_class(class)
                        .with_size(length, width);
                    row(model, g, &ego, &[other], params.class_thw, class.as_str().to_string())
                })
                .collect())
        }
        SweepKind::IntersectionProfile => {
            if !(params.conflict_window.is_finite() && params.conflict_window > 0.0) {
                return Err(EvalError::BadParameter("conflict_window must be positive".into()));
            }
            let table = synth_scenario(&SynthSpec::IntersectionApproach(params.intersection.clone()))?;
            let options = sweep_extraction(g);
            let mut out = Vec::new();
            for frame in table.frames() {
                let scene = extract_scene(&table, 1, frame, &options)?;
                let x = scene.ego.x;
                out.push(row(model, g, &scene.ego, &scene.neighbor_states(), x, format!("frame {frame}")));
            }
            Ok(out)
        }
    }
}

/// Whether an intersection-profile abscissa lies inside the conflict
/// window, the last `conflict_window` meters before the conflict point.
pub fn in_conflict_window(x: f64, params: &SweepParams) -> bool {
    (-params.conflict_window..=0.0).contains(&x)
}

/// CSV with header `x,label,total,front,rear`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in SweepKind::ALL {
            assert_eq!(k.as_str().parse::<SweepKind>().unwrap(), k);
        }
        assert!("nope".parse::<SweepKind>().is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = SweepParams {
            thw: vec![1.0, -1.0],
            ..SweepParams::default()
        };
        assert!(qpr_sweep(SweepKind::Thw, &p, &RiskModel::default()).is_err());
    }

    #[test]
    fn csv_header() {
        let rows = vec![SweepRow {
            x: 1.0,
            label: "truck".into(),
            total: 2.0,
            front: 2.0,
            rear: 0.0,
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,label,total,front,rear\n1.0,truck,2.0,2.0,0.0\n");
    }
}
