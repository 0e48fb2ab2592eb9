//! Driver-risk-field quantification and a closed-loop, memory-augmented
//! language-model driving decision framework.
//!
//! The crate is organized bottom-up:
//!
//! * [`risk_field`] computes the dynamic driver risk field, object cost maps
//!   and the omnidirectional quantified perceived risk (QPR) of a scene.
//! * [`risk_assessor`] calibrates percentile thresholds over QPR samples and
//!   turns a QPR report into per-participant textual notifications.
//! * [`scene`] ingests highD-style trajectory tables, extracts per-frame
//!   scenes, labels ground-truth actions and synthesizes test scenarios.
//! * [`memory`] is an append-only vector store of past driving experiences.
//! * [`agent`] runs the reasoning / reflection / memory loop against a
//!   pluggable chat client.
//! * [`eval`] holds the IDM baseline, the safety oracle, metrics and sweeps.

pub mod agent;
pub mod config;
pub mod eval;
pub mod memory;
pub mod risk_assessor;
pub mod risk_field;
pub mod scene;
pub mod vehicle;

pub use config::AppConfig;
pub use scene::Action;
pub use vehicle::{VehicleClass, VehicleState};
