//! Trajectory ingestion, per-frame scene extraction, textual rendering,
//! ground-truth labeling and synthetic scenario generation.

mod action;
mod extract;
mod label;
mod render;
pub mod suite;
pub mod synth;
mod tracks;

use thiserror::Error;

pub use action::{Action, UnknownAction};
pub use extract::{extract_scene, DatasetTag, ExtractOptions, LaneContext, Neighbor, Scene};
pub use label::{
    label_action, labeled_scene, labeled_scenes, load_labels, parse_labels, LabelOverrides, LabelSource, LabeledScene,
    LabelerConfig,
};
pub use render::render_scene_text;
pub use synth::{synth_scenario, SynthSpec};
pub use tracks::{
    parse_tracks, parse_tracks_from, write_tracks, ParseOptions, TrackRow, TrajectoryTable,
    HEADING_MIN_SPEED,
};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate row for frame {frame}, id {id}")]
    DuplicateKey { frame: u32, id: i64 },
    #[error("vehicle {id} not present at frame {frame}")]
    UnknownEgo { id: i64, frame: u32 },
    #[error("frame {0} not present in the table")]
    UnknownFrame(u32),
    #[error("track {id} does not reach frame {needed}")]
    TrackTooShort { id: i64, needed: u64 },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("label file line {line}: {reason}")]
    LabelFile { line: u64, reason: String },
}
