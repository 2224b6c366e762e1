//! Core simulation pieces for patch-navigation agents: arena geometry and
//! kinematics, raycast vision with Weber-Fechner distance encoding, the
//! feedforward policy network, and the perception-action episode loop.

pub mod arena;
pub mod bytesio;
pub mod checkpoint;
pub mod episode;
pub mod error;
pub mod geometry;
pub mod policy;
pub mod rng;
pub mod vision;

pub use arena::{ArenaSpec, AgentState, MotionCommand, WallId};
pub use episode::{EpisodeOutcome, SimParams, StepSample, VisionParams};
pub use error::CoreError;
pub use geometry::{wrap_angle, Vec2};
pub use policy::{ArchSpec, PolicyGenome};
pub use vision::{EncodingCalibration, RayHit, VisualFrame};
