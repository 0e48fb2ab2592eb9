use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Road-user category. Each class carries its own collision cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Sedan,
    Truck,
    Bus,
    Motorcycle,
    Vru,
    Other,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 6] = [
        VehicleClass::Sedan,
        VehicleClass::Truck,
        VehicleClass::Bus,
        VehicleClass::Motorcycle,
        VehicleClass::Vru,
        VehicleClass::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Sedan => "sedan",
            VehicleClass::Truck => "truck",
            VehicleClass::Bus => "bus",
            VehicleClass::Motorcycle => "motorcycle",
            VehicleClass::Vru => "vru",
            VehicleClass::Other => "other",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VehicleClass {
    type Err = std::convert::Infallible;

    /// Accepts the canonical names plus the class labels used by the
    /// highD / inD / rounD recordings. Unknown labels map to `Other`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "sedan" | "car" | "van" => VehicleClass::Sedan,
            "truck" | "truck_bus" | "trailer" => VehicleClass::Truck,
            "bus" => VehicleClass::Bus,
            "motorcycle" | "motorbike" => VehicleClass::Motorcycle,
            "vru" | "pedestrian" | "bicycle" | "bicyclist" | "cyclist" => VehicleClass::Vru,
            _ => VehicleClass::Other,
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InvalidState {
    #[error("vehicle {id}: speed must be finite and non-negative, got {value}")]
    Speed { id: i64, value: f64 },
    #[error("vehicle {id}: {field} must be finite and positive, got {value}")]
    Dimension {
        id: i64,
        field: &'static str,
        value: f64,
    },
    #[error("vehicle {id}: |steering| must be below pi/2, got {value}")]
    Steering { id: i64, value: f64 },
    #[error("vehicle {id}: pose must be finite")]
    Pose { id: i64 },
}

/// Pose, kinematics, geometry and class of one road user at one frame.
///
/// Heading is counter-clockwise from +x. Steering is signed, positive to the
/// left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: i64,
    pub class: VehicleClass,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    #[serde(default)]
    pub steering: f64,
    pub width: f64,
    pub length: f64,
    pub wheelbase: f64,
}

impl VehicleState {
    /// A 1.8 m x 4.5 m passenger car with a 2.7 m wheelbase.
    pub fn sedan(id: i64, x: f64, y: f64, heading: f64, speed: f64) -> Self {
        VehicleState {
            id,
            class: VehicleClass::Sedan,
            x,
            y,
            heading: wrap_angle(heading),
            speed,
            steering: 0.0,
            width: 1.8,
            length: 4.5,
            wheelbase: 2.7,
        }
    }

    pub fn with_class(mut self, class: VehicleClass) -> Self {
        self.class = class;
        self
    }

    pub fn with_steering(mut self, steering: f64) -> Self {
        self.steering = steering;
        self
    }

    pub fn with_size(mut self, length: f64, width: f64) -> Self {
        self.length = length;
        self.width = width;
        self
    }

    pub fn validate(&self) -> Result<(), InvalidState> {
        let id = self.id;
        if !(self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()) {
            return Err(InvalidState::Pose { id });
        }
        if !(self.speed.is_finite() && self.speed >= 0.0) {
            return Err(InvalidState::Speed {
                id,
                value: self.speed,
            });
        }
        for (field, value) in [
            ("width", self.width),
            ("length", self.length),
            ("wheelbase", self.wheelbase),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(InvalidState::Dimension { id, field, value });
            }
        }
        if !(self.steering.is_finite() && self.steering.abs() < PI / 2.0) {
            return Err(InvalidState::Steering {
                id,
                value: self.steering,
            });
        }
        Ok(())
    }

    /// Unit vector along the heading.
    pub fn direction(&self) -> (f64, f64) {
        (self.heading.cos(), self.heading.sin())
    }

    /// Coordinates of a world point in this vehicle's frame
    /// (longitudinal along heading, lateral positive to the left).
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (c, s) = self.direction();
        let dx = x - self.x;
        let dy = y - self.y;
        (dx * c + dy * s, -dx * s + dy * c)
    }

    pub fn velocity(&self) -> (f64, f64) {
        let (c, s) = self.direction();
        (self.speed * c, self.speed * s)
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}
