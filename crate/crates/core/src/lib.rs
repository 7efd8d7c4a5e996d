//! Pseudo-haptic weight simulation.
//!
//! The crate renders virtual weight through a dynamic control/display ratio
//! driven by glove force readings, and wraps it in two cube games that can be
//! played live over a socket, replayed from traces, or played in bulk by
//! synthetic participants.

// `!(x > 0.0)` guards are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod games;
pub mod harness;
pub mod haptics;
pub mod scene;
pub mod sensor;
pub mod service;
pub mod stats;
pub mod trace;

pub use agent::{run_cohort, CohortConfig, CohortReport, Condition, ParticipantModel};
pub use games::{new_game, AttemptReport, GameAction, GameKind, GameState, Location, Screen};
pub use haptics::{DynamicsConfig, ForceSample, HandState, ObjectState, Phase};
pub use scene::{GloveCalibration, Scene, SceneGeometry};
pub use sensor::{CalibrationModel, Channel, SensorFrame};
