use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Closed vocabulary of ego maneuvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Accelerate,
    Decelerate,
    LaneChangeLeft,
    LaneChangeRight,
    TurnLeft,
    TurnRight,
    Idle,
}

impl Action {
    pub const ALL: [Action; 7] = [
        Action::Accelerate,
        Action::Decelerate,
        Action::LaneChangeLeft,
        Action::LaneChangeRight,
        Action::TurnLeft,
        Action::TurnRight,
        Action::Idle,
    ];

    /// Stable lowercase token used in prompts, logs and label files.
    pub fn token(self) -> &'static str {
        match self {
            Action::Accelerate => "accelerate",
            Action::Decelerate => "decelerate",
            Action::LaneChangeLeft => "lane_change_left",
            Action::LaneChangeRight => "lane_change_right",
            Action::TurnLeft => "turn_left",
            Action::TurnRight => "turn_right",
            Action::Idle => "idle",
        }
    }

    pub fn from_token(token: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.token() == token)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown action token {0:?}")]
pub struct UnknownAction(pub String);

impl FromStr for Action {
    type Err = UnknownAction;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::from_token(s.trim()).ok_or_else(|| UnknownAction(s.to_string()))
    }
}
